//! Grey-level morphology over grids: erosion, dilation, opening, geodesic
//! reconstruction by dilation, and the top-hat by reconstruction used for
//! treetop extraction.
//!
//! All neighborhood operations clip the structuring element to the grid
//! (no padding value), so borders never fabricate peaks. Nodata cells are
//! excluded from min/max reductions; a neighborhood with no valid cell
//! yields nodata.

use crate::error::{Error, Result};
use crate::raster::Grid;

/// Disk-shaped structuring element with precomputed pixel offsets.
#[derive(Debug, Clone)]
pub struct StructuringElement {
    radius: usize,
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    /// Disk of the given pixel radius: all integer offsets with
    /// `dr^2 + dc^2 <= radius^2`. Includes (0, 0) and is symmetric under
    /// negation.
    pub fn disk(radius: usize) -> StructuringElement {
        let r = radius as i32;
        let mut offsets = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc <= r * r {
                    offsets.push((dr, dc));
                }
            }
        }
        StructuringElement { radius, offsets }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Minimum filter over the structuring element neighborhood.
pub fn erode(grid: &Grid, se: &StructuringElement) -> Grid {
    reduce(grid, se, f64::min, f64::INFINITY)
}

/// Maximum filter over the structuring element neighborhood.
pub fn dilate(grid: &Grid, se: &StructuringElement) -> Grid {
    reduce(grid, se, f64::max, f64::NEG_INFINITY)
}

/// Erosion followed by dilation with the same element. Anti-extensive:
/// the result never exceeds the input at valid cells.
pub fn opening(grid: &Grid, se: &StructuringElement) -> Grid {
    dilate(&erode(grid, se), se)
}

fn reduce(grid: &Grid, se: &StructuringElement, op: fn(f64, f64) -> f64, unit: f64) -> Grid {
    let mut out = grid.like(grid.nodata());
    let h = grid.height() as isize;
    let w = grid.width() as isize;
    for row in 0..h {
        for col in 0..w {
            let mut acc = unit;
            let mut seen = false;
            for &(dr, dc) in se.offsets() {
                let rr = row + dr as isize;
                let cc = col + dc as isize;
                if rr < 0 || cc < 0 || rr >= h || cc >= w {
                    continue;
                }
                let v = grid.get(rr as usize, cc as usize);
                if v == grid.nodata() {
                    continue;
                }
                acc = op(acc, v);
                seen = true;
            }
            if seen {
                out.set(row as usize, col as usize, acc);
            }
        }
    }
    out
}

/// Geodesic reconstruction by dilation of `marker` under `mask`, with the
/// 4-connected unit cross: the fixed point of
/// `r <- min(dilate4(r), mask)` starting from `r = min(marker, mask)`.
///
/// Cells where the mask is nodata stay nodata and block propagation.
/// Implemented with a forward/backward raster sweep followed by queue
/// propagation; the result is identical to naive iteration.
pub fn reconstruct_by_dilation(marker: &Grid, mask: &Grid) -> Result<Grid> {
    if !marker.same_geometry(mask) {
        return Err(Error::Input(
            "marker and mask geometries do not match".into(),
        ));
    }
    let h = mask.height();
    let w = mask.width();
    let nodata = mask.nodata();

    // Internal representation: nodata (in the mask) -> NEG_INFINITY so it
    // never raises a neighbor; marker clamped to the mask.
    let mut rec: Vec<f64> = Vec::with_capacity(w * h);
    let mut ceiling: Vec<f64> = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let m = mask.values()[i];
        if m == nodata {
            ceiling.push(f64::NEG_INFINITY);
            rec.push(f64::NEG_INFINITY);
        } else {
            ceiling.push(m);
            let mk = marker.values()[i];
            let mk = if mk == marker.nodata() {
                f64::NEG_INFINITY
            } else {
                mk
            };
            rec.push(mk.min(m));
        }
    }

    let idx = |r: usize, c: usize| r * w + c;

    // Forward sweep: propagate from north and west neighbors.
    for r in 0..h {
        for c in 0..w {
            let i = idx(r, c);
            let mut v = rec[i];
            if r > 0 {
                v = v.max(rec[idx(r - 1, c)]);
            }
            if c > 0 {
                v = v.max(rec[idx(r, c - 1)]);
            }
            rec[i] = v.min(ceiling[i]);
        }
    }
    // Backward sweep: propagate from south and east; queue cells that could
    // still push a value into a neighbor.
    let mut queue: std::collections::VecDeque<(usize, usize)> = std::collections::VecDeque::new();
    for r in (0..h).rev() {
        for c in (0..w).rev() {
            let i = idx(r, c);
            let mut v = rec[i];
            if r + 1 < h {
                v = v.max(rec[idx(r + 1, c)]);
            }
            if c + 1 < w {
                v = v.max(rec[idx(r, c + 1)]);
            }
            let v = v.min(ceiling[i]);
            rec[i] = v;
            let south_open =
                r + 1 < h && rec[idx(r + 1, c)] < v && rec[idx(r + 1, c)] < ceiling[idx(r + 1, c)];
            let east_open =
                c + 1 < w && rec[idx(r, c + 1)] < v && rec[idx(r, c + 1)] < ceiling[idx(r, c + 1)];
            if south_open || east_open {
                queue.push_back((r, c));
            }
        }
    }

    // FIFO propagation until stable. The cap is generous; hitting it means
    // the queue logic is broken, not that the data is unusual.
    let cap = 64usize.saturating_mul(w).saturating_mul(h).max(1 << 20);
    let mut pops = 0usize;
    while let Some((r, c)) = queue.pop_front() {
        pops += 1;
        if pops > cap {
            return Err(Error::Internal(
                "reconstruction queue failed to converge".into(),
            ));
        }
        let v = rec[idx(r, c)];
        let push = |rr: usize,
                    cc: usize,
                    queue: &mut std::collections::VecDeque<(usize, usize)>,
                    rec: &mut Vec<f64>| {
            let j = idx(rr, cc);
            let candidate = v.min(ceiling[j]);
            if rec[j] < candidate {
                rec[j] = candidate;
                queue.push_back((rr, cc));
            }
        };
        if r > 0 {
            push(r - 1, c, &mut queue, &mut rec);
        }
        if r + 1 < h {
            push(r + 1, c, &mut queue, &mut rec);
        }
        if c > 0 {
            push(r, c - 1, &mut queue, &mut rec);
        }
        if c + 1 < w {
            push(r, c + 1, &mut queue, &mut rec);
        }
    }

    let mut out = mask.like(nodata);
    for r in 0..h {
        for c in 0..w {
            let i = idx(r, c);
            if ceiling[i] == f64::NEG_INFINITY {
                continue; // mask nodata stays nodata
            }
            let v = rec[i];
            out.set(r, c, if v == f64::NEG_INFINITY { nodata } else { v });
        }
    }
    Ok(out)
}

/// Top-hat by reconstruction: `dsm - reconstruct_by_dilation(erode(dsm, se), dsm)`.
///
/// Isolates blob-shaped peaks; flat regions map to zero and every valid
/// output cell is non-negative. Nodata cells in the DSM stay nodata.
pub fn top_hat_reconstruction(dsm: &Grid, se: &StructuringElement) -> Result<Grid> {
    let marker = erode(dsm, se);
    let rec = reconstruct_by_dilation(&marker, dsm)?;
    let mut out = dsm.like(dsm.nodata());
    for row in 0..dsm.height() {
        for col in 0..dsm.width() {
            let v = dsm.get(row, col);
            if v == dsm.nodata() {
                continue;
            }
            let r = rec.get(row, col);
            if r == rec.nodata() {
                continue;
            }
            out.set(row, col, v - r);
        }
    }
    Ok(out)
}
