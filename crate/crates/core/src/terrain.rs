//! Terrain / off-terrain classification and above-ground height queries.
//!
//! Classification drapes a simulated cloth over the height-inverted DSM:
//! cloth nodes fall under gravity, are pinned on contact with the inverted
//! surface, and pull on their neighbors through spring constraints whose
//! strength grows with the rigidness class. A cell is terrain when the
//! settled cloth lies within `class_threshold` of its inverted height.
//!
//! Above-ground height subtracts the mean DSM value of terrain cells inside
//! a square search window centered on the query pixel; the window doubles
//! (up to four times) when it contains no terrain. DTM-less modes replace
//! the terrain query with a constant height or a lowest-point difference.

use crate::error::{Error, Result};
use crate::raster::{Grid, Mask};

/// Cloth simulation parameters. The defaults suit ~0.3 m resolution DSMs.
#[derive(Debug, Clone)]
pub struct CsfParams {
    /// Cloth node spacing in meters.
    pub cloth_resolution: f64,
    /// Rigidness class 1-3; higher bridges larger off-terrain objects.
    pub rigidness: u8,
    /// Maximum gravity iterations (the simulation stops early once node
    /// movement falls below 5 mm).
    pub gravity_iterations: usize,
    /// Terrain classification threshold in meters.
    pub class_threshold: f64,
    /// Simulation time step.
    pub time_step: f64,
}

impl Default for CsfParams {
    fn default() -> Self {
        CsfParams {
            cloth_resolution: 2.0,
            rigidness: 2,
            gravity_iterations: 500,
            class_threshold: 0.5,
            time_step: 0.65,
        }
    }
}

impl CsfParams {
    pub fn validate(&self) -> Result<()> {
        if self.cloth_resolution <= 0.0 {
            return Err(Error::Config("cloth_resolution must be positive".into()));
        }
        if !(1..=3).contains(&self.rigidness) {
            return Err(Error::Config("rigidness must be 1, 2, or 3".into()));
        }
        if self.gravity_iterations == 0 {
            return Err(Error::Config("gravity_iterations must be >= 1".into()));
        }
        if self.class_threshold <= 0.0 {
            return Err(Error::Config("class_threshold must be positive".into()));
        }
        if self.time_step <= 0.0 {
            return Err(Error::Config("time_step must be positive".into()));
        }
        Ok(())
    }
}

/// How above-ground heights are resolved for treetop candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightMode {
    /// Mean terrain height in a search window around the query pixel.
    Dtm,
    /// Assume a constant height for every point.
    Constant(f64),
    /// Height above the lowest DSM point of the scene, clamped to a maximum.
    LowestPoint(f64),
}

impl HeightMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            HeightMode::Dtm => Ok(()),
            HeightMode::Constant(h) if *h > 0.0 => Ok(()),
            HeightMode::Constant(_) => {
                Err(Error::Config("constant height must be positive".into()))
            }
            HeightMode::LowestPoint(m) if *m > 0.0 => Ok(()),
            HeightMode::LowestPoint(_) => Err(Error::Config(
                "lowest-point height cap must be positive".into(),
            )),
        }
    }
}

const GRAVITY: f64 = 0.2;
const DAMPING: f64 = 0.01;
const STOP_MOVEMENT: f64 = 0.005;

/// Constraint displacement fractions per rigidness class: `1 - 0.7^r` when
/// only one node is movable, `(1 - 0.4^r) / 2` applied to both otherwise.
fn move_fractions(rigidness: u8) -> (f64, f64) {
    let r = rigidness as i32;
    (1.0 - 0.7f64.powi(r), 0.5 * (1.0 - 0.4f64.powi(r)))
}

/// Classifies DSM cells into terrain (mask bit set) and off-terrain.
pub fn csf_classify(dsm: &Grid, params: &CsfParams) -> Result<Mask> {
    params.validate()?;
    let (min_dsm, max_dsm) = dsm
        .min_max()
        .ok_or_else(|| Error::Input("DSM has no valid cells".into()))?;

    let spacing_px = (params.cloth_resolution / dsm.cell_size()).max(1.0);
    let w = dsm.width();
    let h = dsm.height();
    // one margin node ring around the grid
    let n_rows = ((h as f64 - 1.0) / spacing_px).ceil() as usize + 3;
    let n_cols = ((w as f64 - 1.0) / spacing_px).ceil() as usize + 3;
    let node_px = |i: usize| (i as f64 - 1.0) * spacing_px;

    // Collision height per node: the highest inverted value (lowest DSM)
    // among cells within half a spacing, clamped to the grid so margin
    // nodes inherit edge values. Nodes over nodata fall to the scene floor.
    let half = (spacing_px / 2.0).ceil() as isize;
    let floor_height = -max_dsm;
    let mut hit = vec![floor_height; n_rows * n_cols];
    for i in 0..n_rows {
        for j in 0..n_cols {
            let pr = node_px(i).round() as isize;
            let pc = node_px(j).round() as isize;
            let r0 = (pr - half).clamp(0, h as isize - 1) as usize;
            let r1 = (pr + half).clamp(0, h as isize - 1) as usize;
            let c0 = (pc - half).clamp(0, w as isize - 1) as usize;
            let c1 = (pc + half).clamp(0, w as isize - 1) as usize;
            let mut best = f64::INFINITY;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let v = dsm.get(r, c);
                    if v != dsm.nodata() && v < best {
                        best = v;
                    }
                }
            }
            if best.is_finite() {
                hit[i * n_cols + j] = -best;
            }
        }
    }

    // Drop the cloth in inverted space.
    let start = -min_dsm + 1.0;
    let mut z = vec![start; n_rows * n_cols];
    let mut prev = vec![start; n_rows * n_cols];
    let mut movable = vec![true; n_rows * n_cols];
    let (single_move, double_move) = move_fractions(params.rigidness);
    let dt2 = params.time_step * params.time_step;

    for _ in 0..params.gravity_iterations {
        let mut max_diff: f64 = 0.0;
        // gravity step (Verlet)
        for k in 0..z.len() {
            if !movable[k] {
                continue;
            }
            let cur = z[k];
            z[k] = cur + (cur - prev[k]) * (1.0 - DAMPING) - GRAVITY * dt2;
            prev[k] = cur;
            if z[k] <= hit[k] {
                z[k] = hit[k];
                movable[k] = false;
            }
            max_diff = max_diff.max((z[k] - cur).abs());
        }
        // spring constraints: direct neighbors, diagonals, and 2-step bends
        const LINKS: [(usize, usize); 8] = [
            (0, 1),
            (1, 0),
            (1, 1),
            (1, usize::MAX), // (1, -1) diagonal
            (0, 2),
            (2, 0),
            (2, 2),
            (2, usize::MAX - 1), // (2, -2)
        ];
        for i in 0..n_rows {
            for j in 0..n_cols {
                for &(di, dj) in &LINKS {
                    let ii = i + di;
                    let jj = match dj {
                        usize::MAX => match j.checked_sub(1) {
                            Some(v) => v,
                            None => continue,
                        },
                        v if v == usize::MAX - 1 => match j.checked_sub(2) {
                            Some(v) => v,
                            None => continue,
                        },
                        v => j + v,
                    };
                    if ii >= n_rows || jj >= n_cols {
                        continue;
                    }
                    let a = i * n_cols + j;
                    let b = ii * n_cols + jj;
                    let diff = z[b] - z[a];
                    match (movable[a], movable[b]) {
                        (true, true) => {
                            let m = diff * double_move;
                            z[a] += m;
                            z[b] -= m;
                        }
                        (true, false) => z[a] += diff * single_move,
                        (false, true) => z[b] -= diff * single_move,
                        (false, false) => {}
                    }
                }
            }
        }
        // collision after constraint relaxation
        for k in 0..z.len() {
            if movable[k] && z[k] <= hit[k] {
                z[k] = hit[k];
                movable[k] = false;
            }
        }
        if max_diff < STOP_MOVEMENT {
            break;
        }
    }

    // Classify against the bilinearly interpolated cloth.
    let mut mask = Mask::like(dsm);
    for r in 0..h {
        for c in 0..w {
            let v = dsm.get(r, c);
            if v == dsm.nodata() {
                continue;
            }
            let u = r as f64 / spacing_px + 1.0;
            let t = c as f64 / spacing_px + 1.0;
            let i0 = (u.floor() as usize).min(n_rows - 2);
            let j0 = (t.floor() as usize).min(n_cols - 2);
            let fu = u - i0 as f64;
            let ft = t - j0 as f64;
            let z00 = z[i0 * n_cols + j0];
            let z01 = z[i0 * n_cols + j0 + 1];
            let z10 = z[(i0 + 1) * n_cols + j0];
            let z11 = z[(i0 + 1) * n_cols + j0 + 1];
            let cloth = z00 * (1.0 - fu) * (1.0 - ft)
                + z01 * (1.0 - fu) * ft
                + z10 * fu * (1.0 - ft)
                + z11 * fu * ft;
            if ((-v) - cloth).abs() <= params.class_threshold {
                mask.set(r, c, true);
            }
        }
    }
    Ok(mask)
}

/// Above-ground height of pixel `(row, col)`: its DSM value minus the mean
/// DSM value over terrain cells inside the square window of half-width
/// `window_radius` pixels. An empty window doubles up to four times; if it
/// is still empty the query fails with [`Error::NoTerrain`].
pub fn above_ground_height(
    dsm: &Grid,
    terrain: &Mask,
    row: usize,
    col: usize,
    window_radius: usize,
) -> Result<f64> {
    if row >= dsm.height() || col >= dsm.width() {
        return Err(Error::Input(format!(
            "pixel ({}, {}) outside {}x{} grid",
            row,
            col,
            dsm.width(),
            dsm.height()
        )));
    }
    if window_radius == 0 {
        return Err(Error::Input("window radius must be >= 1".into()));
    }
    let v = dsm.get(row, col);
    if v == dsm.nodata() {
        return Err(Error::Input(format!("pixel ({}, {}) is nodata", row, col)));
    }
    let mut radius = window_radius;
    for _ in 0..5 {
        let mut sum = 0.0;
        let mut n = 0usize;
        let r0 = row.saturating_sub(radius);
        let r1 = (row + radius).min(dsm.height() - 1);
        let c0 = col.saturating_sub(radius);
        let c1 = (col + radius).min(dsm.width() - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if terrain.get(r, c) {
                    let t = dsm.get(r, c);
                    if t != dsm.nodata() {
                        sum += t;
                        n += 1;
                    }
                }
            }
        }
        if n > 0 {
            return Ok(v - sum / n as f64);
        }
        radius *= 2;
    }
    Err(Error::NoTerrain { row, col })
}

/// Resolves a pixel's above-ground height under the given mode.
pub fn resolve_height(
    dsm: &Grid,
    terrain: &Mask,
    row: usize,
    col: usize,
    mode: HeightMode,
    window_radius: usize,
) -> Result<f64> {
    mode.validate()?;
    match mode {
        HeightMode::Dtm => above_ground_height(dsm, terrain, row, col, window_radius),
        HeightMode::Constant(h) => Ok(h),
        HeightMode::LowestPoint(max_h) => {
            let v = dsm.value(row as isize, col as isize).ok_or_else(|| {
                Error::Input(format!(
                    "pixel ({}, {}) is nodata or out of bounds",
                    row, col
                ))
            })?;
            let (scene_min, _) = dsm
                .min_max()
                .ok_or_else(|| Error::Input("DSM has no valid cells".into()))?;
            Ok((v - scene_min).min(max_h))
        }
    }
}

/// Precomputed terrain statistics for fast repeated height queries: box
/// sums over terrain cells allow O(1) window means, which makes per-pixel
/// above-ground surfaces affordable.
pub struct TerrainModel {
    width: usize,
    height: usize,
    /// (w+1)x(h+1) prefix sums of terrain DSM values and counts.
    sum: Vec<f64>,
    cnt: Vec<u32>,
    scene_min: f64,
    window_radius: usize,
}

impl TerrainModel {
    pub fn new(dsm: &Grid, terrain: &Mask, window_radius: usize) -> Result<TerrainModel> {
        if window_radius == 0 {
            return Err(Error::Input("window radius must be >= 1".into()));
        }
        let (scene_min, _) = dsm
            .min_max()
            .ok_or_else(|| Error::Input("DSM has no valid cells".into()))?;
        let w = dsm.width();
        let h = dsm.height();
        let mut sum = vec![0.0f64; (w + 1) * (h + 1)];
        let mut cnt = vec![0u32; (w + 1) * (h + 1)];
        for r in 0..h {
            for c in 0..w {
                let (s, n) = if terrain.get(r, c) && !dsm.is_nodata(r, c) {
                    (dsm.get(r, c), 1u32)
                } else {
                    (0.0, 0)
                };
                let i = (r + 1) * (w + 1) + (c + 1);
                sum[i] = s + sum[i - 1] + sum[i - (w + 1)] - sum[i - (w + 1) - 1];
                cnt[i] = n + cnt[i - 1] + cnt[i - (w + 1)] - cnt[i - (w + 1) - 1];
            }
        }
        Ok(TerrainModel {
            width: w,
            height: h,
            sum,
            cnt,
            scene_min,
            window_radius,
        })
    }

    pub fn scene_min(&self) -> f64 {
        self.scene_min
    }

    fn window_stats(&self, row: usize, col: usize, radius: usize) -> (f64, u32) {
        let r0 = row.saturating_sub(radius);
        let r1 = (row + radius).min(self.height - 1);
        let c0 = col.saturating_sub(radius);
        let c1 = (col + radius).min(self.width - 1);
        let w1 = self.width + 1;
        let at = |r: usize, c: usize| r * w1 + c;
        let s = self.sum[at(r1 + 1, c1 + 1)] - self.sum[at(r0, c1 + 1)] - self.sum[at(r1 + 1, c0)]
            + self.sum[at(r0, c0)];
        let n = self.cnt[at(r1 + 1, c1 + 1)] as i64
            - self.cnt[at(r0, c1 + 1)] as i64
            - self.cnt[at(r1 + 1, c0)] as i64
            + self.cnt[at(r0, c0)] as i64;
        (s, n as u32)
    }

    /// Mean terrain height around the pixel, with window doubling.
    pub fn terrain_mean(&self, row: usize, col: usize) -> Result<f64> {
        let mut radius = self.window_radius;
        for _ in 0..5 {
            let (s, n) = self.window_stats(row, col, radius);
            if n > 0 {
                return Ok(s / n as f64);
            }
            radius *= 2;
        }
        Err(Error::NoTerrain { row, col })
    }

    /// Above-ground height of a valid DSM pixel.
    pub fn above_ground(&self, dsm: &Grid, row: usize, col: usize) -> Result<f64> {
        let v = dsm.value(row as isize, col as isize).ok_or_else(|| {
            Error::Input(format!(
                "pixel ({}, {}) is nodata or out of bounds",
                row, col
            ))
        })?;
        Ok(v - self.terrain_mean(row, col)?)
    }

    pub fn resolve(&self, dsm: &Grid, row: usize, col: usize, mode: HeightMode) -> Result<f64> {
        match mode {
            HeightMode::Dtm => self.above_ground(dsm, row, col),
            HeightMode::Constant(h) => Ok(h),
            HeightMode::LowestPoint(max_h) => {
                let v = dsm.value(row as isize, col as isize).ok_or_else(|| {
                    Error::Input(format!(
                        "pixel ({}, {}) is nodata or out of bounds",
                        row, col
                    ))
                })?;
                Ok((v - self.scene_min).min(max_h))
            }
        }
    }
}
