//! Connected component labeling over boolean pixel predicates.

/// Labels 8-connected components of the pixels where `foreground` is true.
///
/// Returns a row-major label map (0 = background, components numbered from
/// 1 in row-major discovery order) and the component count.
pub fn label_components_8<F>(width: usize, height: usize, foreground: F) -> (Vec<u32>, u32)
where
    F: Fn(usize, usize) -> bool,
{
    let mut labels = vec![0u32; width * height];
    let mut next = 0u32;
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for row in 0..height {
        for col in 0..width {
            if labels[row * width + col] != 0 || !foreground(row, col) {
                continue;
            }
            next += 1;
            stack.push((row, col));
            labels[row * width + col] = next;
            while let Some((r, c)) = stack.pop() {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let rr = r as i64 + dr;
                        let cc = c as i64 + dc;
                        if rr < 0 || cc < 0 || rr as usize >= height || cc as usize >= width {
                            continue;
                        }
                        let (rr, cc) = (rr as usize, cc as usize);
                        if labels[rr * width + cc] == 0 && foreground(rr, cc) {
                            labels[rr * width + cc] = next;
                            stack.push((rr, cc));
                        }
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Pixels of each component, indexed by label-1, in row-major order.
pub fn component_pixels(labels: &[u32], width: usize, count: u32) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); count as usize];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            out[(l - 1) as usize].push((i / width, i % width));
        }
    }
    out
}
