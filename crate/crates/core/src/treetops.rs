//! Treetop extraction: top-hat candidate detection, fixed-window and
//! slope-break baseline detectors, the above-ground height filter, and
//! allometric non-maximum suppression.

use crate::error::{Error, Result};
use crate::labeling::{component_pixels, label_components_8};
use crate::morphology::{opening, top_hat_reconstruction, StructuringElement};
use crate::raster::{Grid, Mask};
use crate::terrain::{HeightMode, TerrainModel};

/// Response values below this are treated as zero when binarizing the
/// top-hat output (guards against floating point residue).
pub const THR_EPSILON: f64 = 1e-6;

/// A detected treetop. `above_ground` and `crown_diameter` are NaN until
/// [`height_filter`] resolves them.
#[derive(Debug, Clone, PartialEq)]
pub struct TreetopCandidate {
    pub row: usize,
    pub col: usize,
    pub dsm_height: f64,
    pub above_ground: f64,
    pub crown_diameter: f64,
}

impl TreetopCandidate {
    fn at(row: usize, col: usize, dsm_height: f64) -> TreetopCandidate {
        TreetopCandidate {
            row,
            col,
            dsm_height,
            above_ground: f64::NAN,
            crown_diameter: f64::NAN,
        }
    }
}

/// Which treetop detector the pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorKind {
    /// Top-hat by reconstruction with the given SE radius (pixels).
    TopHat { se_radius: usize },
    /// Fixed odd window size in pixels (the comparative baselines use
    /// 3, 7, 11, 15, and 19).
    FixedWindow { size: usize },
    /// Variable window sized by slope breaks along compass transects.
    SlopeBreak,
}

impl DetectorKind {
    pub fn label(&self) -> String {
        match self {
            DetectorKind::TopHat { .. } => "TH".to_string(),
            DetectorKind::FixedWindow { size } => format!("F_{}", size),
            DetectorKind::SlopeBreak => "SB".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorKind::TopHat { se_radius } if *se_radius >= 1 => Ok(()),
            DetectorKind::TopHat { .. } => {
                Err(Error::Config("top-hat SE radius must be >= 1".into()))
            }
            DetectorKind::FixedWindow { size } if *size >= 3 && size % 2 == 1 => Ok(()),
            DetectorKind::FixedWindow { .. } => Err(Error::Config(
                "fixed window size must be odd and >= 3".into(),
            )),
            DetectorKind::SlopeBreak => Ok(()),
        }
    }
}

/// Crown diameter (meters) from the above-ground height of a treetop, per
/// the deciduous-tree allometric relation `3.09632 + 0.00895 * h^2`.
pub fn allometric_diameter(height: f64) -> Result<f64> {
    if height < 0.0 || !height.is_finite() {
        return Err(Error::Input(format!(
            "tree height must be non-negative and finite, got {}",
            height
        )));
    }
    Ok(3.09632 + 0.00895 * height * height)
}

/// Top-hat treetop candidates: the THR response over the vegetated area is
/// binarized, opened to cut weak connections, labeled into 8-connected
/// regions, and each region contributes its highest DSM pixel. Candidates
/// outside the vegetation mask are discarded.
///
/// The response is masked to vegetation before labeling: terrain curvature
/// leaves a low-amplitude residue that would otherwise bridge neighboring
/// crown regions across bare ground.
pub fn detect_thr(
    dsm: &Grid,
    veg: &Mask,
    se: &StructuringElement,
    opening_se: &StructuringElement,
) -> Result<Vec<TreetopCandidate>> {
    let thr = top_hat_reconstruction(dsm, se)?;
    let mut positive = dsm.like(0.0);
    for i in 0..thr.len() {
        let v = thr.values()[i];
        if v != thr.nodata() && v > THR_EPSILON && veg.bits()[i] {
            positive.values_mut()[i] = 1.0;
        }
    }
    let opened = opening(&positive, opening_se);
    let (labels, count) =
        label_components_8(dsm.width(), dsm.height(), |r, c| opened.get(r, c) > 0.5);

    let mut out = Vec::new();
    for pixels in component_pixels(&labels, dsm.width(), count) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (r, c) in pixels {
            let v = dsm.get(r, c);
            if v == dsm.nodata() {
                continue;
            }
            best = Some(match best {
                None => (r, c, v),
                // ties resolve to the smallest row, then column; pixels
                // arrive in row-major order so strict > keeps the first
                Some((br, bc, bv)) => {
                    if v > bv {
                        (r, c, v)
                    } else {
                        (br, bc, bv)
                    }
                }
            });
        }
        if let Some((r, c, v)) = best {
            if veg.get(r, c) {
                out.push(TreetopCandidate::at(r, c, v));
            }
        }
    }
    out.sort_by_key(|t| (t.row, t.col));
    Ok(out)
}

/// Fixed-window local maximum detector: a pixel is a candidate iff it is
/// strictly greater than every other valid pixel in its `size` x `size`
/// window (clipped at borders) and lies inside the vegetation mask.
pub fn detect_fixed_window(dsm: &Grid, veg: &Mask, size: usize) -> Result<Vec<TreetopCandidate>> {
    DetectorKind::FixedWindow { size }.validate()?;
    let half = (size / 2) as isize;
    let mut out = Vec::new();
    for row in 0..dsm.height() {
        for col in 0..dsm.width() {
            if !veg.get(row, col) {
                continue;
            }
            let v = dsm.get(row, col);
            if v == dsm.nodata() {
                continue;
            }
            if is_window_max(dsm, row, col, v, half) {
                out.push(TreetopCandidate::at(row, col, v));
            }
        }
    }
    Ok(out)
}

fn is_window_max(dsm: &Grid, row: usize, col: usize, v: f64, half: isize) -> bool {
    for dr in -half..=half {
        for dc in -half..=half {
            if dr == 0 && dc == 0 {
                continue;
            }
            if let Some(n) = dsm.value(row as isize + dr, col as isize + dc) {
                if n >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// A transect breaks once the surface climbs this far (meters) above the
/// lowest value seen along the walk, i.e. once it has clearly entered the
/// next canopy structure; keeps the break distance from collapsing under
/// DSM noise or branch-scale canopy texture.
pub const SLOPE_BREAK_RISE_TOLERANCE: f64 = 5.0;

/// Variable-window detector driven by slope breaks: each 3x3 local maximum
/// walks the 8 compass transects until the surface first rises (by more
/// than the tolerance above the running minimum); the shortest break
/// distance sets the window radius, and the pixel is kept iff it is the
/// strict maximum within that radius.
pub fn detect_slope_break(dsm: &Grid, veg: &Mask) -> Vec<TreetopCandidate> {
    let mut out = Vec::new();
    for row in 0..dsm.height() {
        for col in 0..dsm.width() {
            if !veg.get(row, col) {
                continue;
            }
            let v = dsm.get(row, col);
            if v == dsm.nodata() {
                continue;
            }
            if !is_window_max(dsm, row, col, v, 1) {
                continue;
            }
            let radius = slope_break_radius(dsm, row, col);
            if radius <= 1 {
                continue;
            }
            if is_window_max(dsm, row, col, v, radius as isize) {
                out.push(TreetopCandidate::at(row, col, v));
            }
        }
    }
    out
}

/// Minimum first-rise distance over the 8 compass transects from `(row, col)`.
pub(crate) fn slope_break_radius(dsm: &Grid, row: usize, col: usize) -> usize {
    const DIRS: [(isize, isize); 8] = [
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
    ];
    let mut radius = usize::MAX;
    for &(dr, dc) in &DIRS {
        let mut run_min = dsm.get(row, col);
        let mut steps = 0usize;
        let (mut r, mut c) = (row as isize, col as isize);
        loop {
            r += dr;
            c += dc;
            let v = match dsm.value(r, c) {
                Some(v) => v,
                None => break, // grid edge or nodata ends the transect
            };
            steps += 1;
            if v > run_min + SLOPE_BREAK_RISE_TOLERANCE {
                break;
            }
            run_min = run_min.min(v);
        }
        radius = radius.min(steps);
    }
    if radius == usize::MAX {
        0
    } else {
        radius
    }
}

/// Resolves each candidate's above-ground height under `mode`, keeps those
/// at or above `min_height`, and fills in the allometric crown diameter.
pub fn height_filter(
    candidates: Vec<TreetopCandidate>,
    dsm: &Grid,
    terrain: &TerrainModel,
    mode: HeightMode,
    min_height: f64,
) -> Result<Vec<TreetopCandidate>> {
    if min_height < 0.0 {
        return Err(Error::Config("min_height must be non-negative".into()));
    }
    mode.validate()?;
    let mut out = Vec::with_capacity(candidates.len());
    for mut cand in candidates {
        let h = terrain.resolve(dsm, cand.row, cand.col, mode)?;
        if h >= min_height {
            cand.above_ground = h;
            cand.crown_diameter = allometric_diameter(h.max(0.0))?;
            out.push(cand);
        }
    }
    Ok(out)
}

/// Greedy non-maximum suppression with per-candidate windows: candidates are
/// visited in descending DSM height (ties by row, then column); one survives
/// iff no already-accepted candidate lies inside its own square window of
/// side `crown_diameter` (converted to whole pixels, forced odd).
pub fn non_max_suppress(
    candidates: Vec<TreetopCandidate>,
    cell_size: f64,
) -> Vec<TreetopCandidate> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .dsm_height
            .total_cmp(&candidates[a].dsm_height)
            .then_with(|| {
                (candidates[a].row, candidates[a].col).cmp(&(candidates[b].row, candidates[b].col))
            })
    });

    let mut accepted: Vec<&TreetopCandidate> = Vec::new();
    let mut keep = vec![false; candidates.len()];
    for &i in &order {
        let cand = &candidates[i];
        let half = window_half_width(cand.crown_diameter, cell_size);
        let suppressed = accepted
            .iter()
            .any(|acc| acc.row.abs_diff(cand.row) <= half && acc.col.abs_diff(cand.col) <= half);
        if !suppressed {
            keep[i] = true;
            accepted.push(cand);
        }
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| if k { Some(c) } else { None })
        .collect()
}

/// Meters to a square window half-width: side `ceil(d / cell)` forced odd.
pub fn window_half_width(diameter_m: f64, cell_size: f64) -> usize {
    let side = (diameter_m / cell_size).ceil().max(1.0) as usize;
    let side = if side % 2 == 0 { side + 1 } else { side };
    (side - 1) / 2
}
