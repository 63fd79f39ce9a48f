//! Deterministic synthetic scenes: a smooth terrain surface, paraboloid
//! tree crowns with allometric radii, optional grass patches and flat-roof
//! buildings, an 8-band raster with class spectra, and ground-truth
//! treetops/crowns captured before noise.
//!
//! Identical spec (including the seed) yields a bit-identical scene.

use rand_chacha::rand_core::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{BandRole, Grid, MultibandRaster};
use crate::treetops::{allometric_diameter, TreetopCandidate};

/// Placement archetype.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    /// Non-overlapping crowns, grass patches between them.
    Sparse,
    /// Crowns may overlap up to 40% of the smaller crown's area.
    Dense,
    /// Sparse trees plus grass and flat-roof buildings as confusers.
    Urban,
}

impl DensityMode {
    pub fn parse(s: &str) -> Option<DensityMode> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Some(DensityMode::Sparse),
            "dense" => Some(DensityMode::Dense),
            "urban" => Some(DensityMode::Urban),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityMode::Sparse => "sparse",
            DensityMode::Dense => "dense",
            DensityMode::Urban => "urban",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub n_trees: usize,
    pub density_mode: DensityMode,
    /// Above-ground apex heights are drawn uniformly from this range (m).
    pub height_range: (f64, f64),
    /// Peak-to-trough relief of the smooth terrain surface (m).
    pub terrain_amplitude: f64,
    /// Gaussian DSM noise added after the ground truth is captured (m).
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 512,
            height: 512,
            cell_size: 0.3,
            n_trees: 50,
            density_mode: DensityMode::Sparse,
            height_range: (8.0, 20.0),
            terrain_amplitude: 3.0,
            noise_sigma: 0.15,
            rng_seed: 42,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("scene dimensions must be positive".into()));
        }
        if self.cell_size <= 0.0 {
            return Err(Error::Config("cell size must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        if self.height_range.0 <= 0.0 || self.height_range.1 < self.height_range.0 {
            return Err(Error::Config(
                "height range must satisfy 0 < lo <= hi".into(),
            ));
        }
        if self.terrain_amplitude < 0.0 {
            return Err(Error::Config(
                "terrain amplitude must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Generated scene plus its ground truth (captured before DSM noise).
#[derive(Debug, Clone)]
pub struct Scene {
    pub dsm: Grid,
    pub raster: MultibandRaster,
    pub truth_tops: Vec<TreetopCandidate>,
    /// Crown pixel sets aligned with `truth_tops`.
    pub truth_crowns: Vec<Vec<(usize, usize)>>,
}

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Rng {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn index(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n.max(1)
    }

    fn gaussian(&mut self) -> f64 {
        // Box-Muller; u clamped away from zero for the logarithm
        let u = self.uniform().max(1e-300);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}

/// Smooth low-frequency surface built from a few random plane waves,
/// rescaled to span [0, amplitude].
struct TerrainField {
    waves: Vec<(f64, f64, f64, f64, f64)>, // (amp, ur, uc, wavelength_px, phase)
    offset: f64,
    scale: f64,
}

impl TerrainField {
    fn new(rng: &mut Rng, width: usize, height: usize, amplitude: f64) -> TerrainField {
        let min_dim = width.min(height) as f64;
        let mut waves = Vec::new();
        let mut amp = 1.0;
        for _ in 0..4 {
            let angle = rng.range(0.0, std::f64::consts::TAU);
            let wavelength = rng.range(0.35, 0.8) * min_dim;
            let phase = rng.range(0.0, std::f64::consts::TAU);
            waves.push((amp, angle.cos(), angle.sin(), wavelength, phase));
            amp *= 0.55;
        }
        let mut field = TerrainField {
            waves,
            offset: 0.0,
            scale: 1.0,
        };
        if amplitude > 0.0 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..height {
                for c in 0..width {
                    let v = field.raw(r as f64, c as f64);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi > lo {
                field.scale = amplitude / (hi - lo);
                field.offset = -lo;
            }
        } else {
            field.scale = 0.0;
        }
        field
    }

    fn raw(&self, r: f64, c: f64) -> f64 {
        self.waves
            .iter()
            .map(|&(a, ur, uc, wl, ph)| {
                a * (std::f64::consts::TAU * (r * ur + c * uc) / wl + ph).cos()
            })
            .sum()
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        (self.raw(r as f64, c as f64) + self.offset) * self.scale
    }
}

struct Tree {
    row: usize,
    col: usize,
    apex_height: f64,
    radius_px: f64,
    base: f64,
    spectral_factor: f64,
    /// Branch-scale sub-peaks riding on the crown: (row, col, amplitude,
    /// radius_px). Amplitudes stay below the profile drop at their
    /// position, so the apex remains the crown maximum.
    bumps: Vec<(f64, f64, f64, f64)>,
}

impl Tree {
    /// Crown surface above the scene datum at pixel offset `(dr, dc)` from
    /// the apex, falling from the full apex height to half of it at the
    /// crown edge, plus branch bumps. The total bump lift is capped below
    /// the local profile drop, so the apex stays the unique maximum even
    /// where bumps overlap.
    fn surface(&self, dr: f64, dc: f64) -> Option<f64> {
        let d = (dr * dr + dc * dc).sqrt();
        if d > self.radius_px {
            return None;
        }
        let profile = 1.0 - CROWN_EDGE_FRACTION * (d / self.radius_px).powi(2);
        let drop = self.apex_height * (1.0 - profile);
        let mut lift = 0.0;
        let (pr, pc) = (self.row as f64 + dr, self.col as f64 + dc);
        for &(br, bc, amp, radius) in &self.bumps {
            let bd2 = (pr - br) * (pr - br) + (pc - bc) * (pc - bc);
            if bd2 < radius * radius {
                lift += amp * (1.0 - bd2 / (radius * radius));
            }
        }
        Some(self.base + self.apex_height * profile + lift.min(0.9 * drop))
    }
}

struct Building {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
    top: f64,
}

struct GrassPatch {
    row: f64,
    col: f64,
    radius_px: f64,
}

/// Understory shrub: a vegetation dome tall enough to pass the height
/// check but far smaller than any allometric tree crown.
struct Shrub {
    row: usize,
    col: usize,
    height: f64,
    radius_px: f64,
    base: f64,
}

// Eight-band class spectra (WorldView-2 style ordering); RED is band 4 and
// NIR band 6, giving NDVI of about 0.70 over trees, 0.61 over shrubs, 0.50
// over grass, 0.10 over ground, and 0.0 on roofs.
const TREE_SPECTRUM: [f64; 8] = [0.03, 0.05, 0.09, 0.10, 0.105, 0.35, 0.60, 0.58];
const SHRUB_SPECTRUM: [f64; 8] = [0.04, 0.06, 0.10, 0.12, 0.12, 0.32, 0.50, 0.48];
const GRASS_SPECTRUM: [f64; 8] = [0.05, 0.07, 0.12, 0.14, 0.15, 0.30, 0.45, 0.44];
const GROUND_SPECTRUM: [f64; 8] = [0.08, 0.10, 0.14, 0.18, 0.27, 0.30, 0.33, 0.32];
const ROOF_SPECTRUM: [f64; 8] = [0.20, 0.22, 0.25, 0.27, 0.30, 0.30, 0.30, 0.31];

pub const RED_BAND: usize = 4;
pub const NIR_BAND: usize = 6;

/// Fraction of the apex height still present at the crown edge.
const CROWN_EDGE_FRACTION: f64 = 0.5;

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = Rng::new(spec.rng_seed);
    let w = spec.width;
    let h = spec.height;
    let cell = spec.cell_size;

    let terrain = TerrainField::new(&mut rng, w, h, spec.terrain_amplitude);

    // --- tree placement ---------------------------------------------------
    let mut trees: Vec<Tree> = Vec::with_capacity(spec.n_trees);
    let max_attempts = 400 * spec.n_trees.max(1);
    let mut attempts = 0;
    while trees.len() < spec.n_trees {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Input(format!(
                "could not place {} trees after {} attempts",
                spec.n_trees, max_attempts
            )));
        }
        let apex_height = rng.range(spec.height_range.0, spec.height_range.1);
        let radius_m = allometric_diameter(apex_height)? / 2.0;
        let radius_px = radius_m / cell;
        let margin = radius_px.ceil() as usize + 2;
        if 2 * margin >= w || 2 * margin >= h {
            return Err(Error::Input("scene too small for its trees".into()));
        }
        let row = margin + rng.index(h - 2 * margin);
        let col = margin + rng.index(w - 2 * margin);

        let ok = trees.iter().all(|t| {
            let d_px = (((row as f64 - t.row as f64).powi(2) + (col as f64 - t.col as f64).powi(2))
                as f64)
                .sqrt();
            match spec.density_mode {
                DensityMode::Sparse | DensityMode::Urban => d_px >= t.radius_px + radius_px + 2.0,
                DensityMode::Dense => {
                    d_px >= t.radius_px.max(radius_px) + 2.0
                        && lens_fraction(radius_px, t.radius_px, d_px) <= 0.40
                }
            }
        });
        if !ok {
            continue;
        }
        // branch bumps in the outer crown; each amplitude stays below the
        // profile drop at the bump's inner edge so the apex remains the
        // unique crown maximum
        let n_bumps = 3 + rng.index(3);
        let mut bumps = Vec::with_capacity(n_bumps);
        for _ in 0..n_bumps {
            let u = rng.range(0.5, 0.95);
            let angle = rng.range(0.0, std::f64::consts::TAU);
            let bump_radius = rng.range(0.12, 0.22) * radius_px.max(7.0);
            let inner_u = (u - bump_radius / radius_px).max(0.1);
            let drop = apex_height * CROWN_EDGE_FRACTION * u * u;
            let ceiling = 0.8 * apex_height * CROWN_EDGE_FRACTION * inner_u * inner_u;
            let amp = (rng.range(0.3, 0.7) * drop).clamp(0.3, 1.5).min(ceiling);
            bumps.push((
                row as f64 + u * radius_px * angle.sin(),
                col as f64 + u * radius_px * angle.cos(),
                amp,
                bump_radius,
            ));
        }
        trees.push(Tree {
            row,
            col,
            apex_height,
            radius_px,
            base: terrain.at(row, col),
            spectral_factor: rng.range(0.92, 1.08),
            bumps,
        });
    }

    // --- buildings (urban only) --------------------------------------------
    let mut buildings: Vec<Building> = Vec::new();
    if spec.density_mode == DensityMode::Urban {
        let n_boxes = spec.n_trees / 4 + 1;
        let mut box_attempts = 0;
        while buildings.len() < n_boxes && box_attempts < 400 * n_boxes {
            box_attempts += 1;
            let bw = (rng.range(5.0, 12.0) / cell) as usize + 1;
            let bh = (rng.range(5.0, 12.0) / cell) as usize + 1;
            if bw + 4 >= w || bh + 4 >= h {
                continue;
            }
            let r0 = 2 + rng.index(h - bh - 4);
            let c0 = 2 + rng.index(w - bw - 4);
            let (r1, c1) = (r0 + bh, c0 + bw);
            let clear = trees.iter().all(|t| {
                let rr = t.row as f64;
                let cc = t.col as f64;
                let m = t.radius_px + 2.0;
                rr + m < r0 as f64 || rr - m > r1 as f64 || cc + m < c0 as f64 || cc - m > c1 as f64
            }) && buildings
                .iter()
                .all(|b| r1 + 2 < b.r0 || r0 > b.r1 + 2 || c1 + 2 < b.c0 || c0 > b.c1 + 2);
            if !clear {
                continue;
            }
            let center_base = terrain.at((r0 + r1) / 2, (c0 + c1) / 2);
            buildings.push(Building {
                r0,
                c0,
                r1,
                c1,
                top: center_base + rng.range(5.0, 12.0),
            });
        }
    }

    // --- grass patches (sparse and urban) ----------------------------------
    let mut grass: Vec<GrassPatch> = Vec::new();
    if matches!(spec.density_mode, DensityMode::Sparse | DensityMode::Urban) {
        let n_patches = (spec.n_trees / 6).max(2);
        for _ in 0..n_patches {
            grass.push(GrassPatch {
                row: rng.range(0.0, h as f64),
                col: rng.range(0.0, w as f64),
                radius_px: rng.range(2.0, 6.0) / cell,
            });
        }
    }

    // --- understory shrubs in the canopy gaps -------------------------------
    let mut shrubs: Vec<Shrub> = Vec::new();
    let n_shrubs = if spec.n_trees == 0 {
        0
    } else {
        (spec.n_trees / 3).max(2)
    };
    let mut shrub_attempts = 0;
    while shrubs.len() < n_shrubs && shrub_attempts < 200 * n_shrubs {
        shrub_attempts += 1;
        let radius_px = rng.range(0.9, 1.2) / cell;
        let margin = radius_px.ceil() as usize + 2;
        if 2 * margin >= w || 2 * margin >= h {
            break;
        }
        let row = margin + rng.index(h - 2 * margin);
        let col = margin + rng.index(w - 2 * margin);
        let clear = trees.iter().all(|t| {
            let d =
                ((row as f64 - t.row as f64).powi(2) + (col as f64 - t.col as f64).powi(2)).sqrt();
            d >= t.radius_px + radius_px + 2.0
        }) && shrubs.iter().all(|s| {
            let d =
                ((row as f64 - s.row as f64).powi(2) + (col as f64 - s.col as f64).powi(2)).sqrt();
            d >= s.radius_px + radius_px + 2.0
        }) && buildings
            .iter()
            .all(|b| row + 2 < b.r0 || row > b.r1 + 2 || col + 2 < b.c0 || col > b.c1 + 2);
        if !clear {
            continue;
        }
        shrubs.push(Shrub {
            row,
            col,
            height: rng.range(2.2, 3.5),
            radius_px,
            base: terrain.at(row, col),
        });
    }
    // blotchy multiplicative texture over grass, so the red band has
    // structure for the spectral-only detection mode
    let grass_texture = TerrainField::new(&mut rng, w / 8 + 2, h / 8 + 2, 0.12);

    // --- compose the true DSM and per-pixel class --------------------------
    #[derive(Debug, Clone, Copy, PartialEq)]
    enum Class {
        Ground,
        Grass,
        Shrub,
        Roof,
        Tree(usize),
    }

    let mut dsm = Grid::filled(w, h, cell, 0.0);
    let mut class = vec![Class::Ground; w * h];
    for r in 0..h {
        for c in 0..w {
            dsm.set(r, c, terrain.at(r, c));
        }
    }
    for g in &grass {
        let r0 = (g.row - g.radius_px).floor().max(0.0) as usize;
        let r1 = ((g.row + g.radius_px).ceil() as usize).min(h - 1);
        let c0 = (g.col - g.radius_px).floor().max(0.0) as usize;
        let c1 = ((g.col + g.radius_px).ceil() as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let d = ((r as f64 - g.row).powi(2) + (c as f64 - g.col).powi(2)).sqrt();
                if d <= g.radius_px {
                    class[r * w + c] = Class::Grass;
                }
            }
        }
    }
    for b in &buildings {
        for r in b.r0..=b.r1 {
            for c in b.c0..=b.c1 {
                if b.top > dsm.get(r, c) {
                    dsm.set(r, c, b.top);
                    class[r * w + c] = Class::Roof;
                }
            }
        }
    }
    for s in &shrubs {
        let reach = s.radius_px.ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let r = s.row as isize + dr;
                let c = s.col as isize + dc;
                if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
                    continue;
                }
                let d = ((dr * dr + dc * dc) as f64).sqrt();
                if d > s.radius_px {
                    continue;
                }
                let z = s.base + s.height * (1.0 - 0.5 * (d / s.radius_px).powi(2));
                let (r, c) = (r as usize, c as usize);
                if z > dsm.get(r, c) {
                    dsm.set(r, c, z);
                    class[r * w + c] = Class::Shrub;
                }
            }
        }
    }
    for (i, t) in trees.iter().enumerate() {
        let reach = t.radius_px.ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let r = t.row as isize + dr;
                let c = t.col as isize + dc;
                if r < 0 || c < 0 || r as usize >= h || c as usize >= w {
                    continue;
                }
                if let Some(z) = t.surface(dr as f64, dc as f64) {
                    let (r, c) = (r as usize, c as usize);
                    if z > dsm.get(r, c) {
                        dsm.set(r, c, z);
                        class[r * w + c] = Class::Tree(i);
                    }
                }
            }
        }
    }

    // --- ground truth (pre-noise) -------------------------------------------
    let mut truth_tops = Vec::with_capacity(trees.len());
    let mut truth_crowns = vec![Vec::new(); trees.len()];
    for (i, t) in trees.iter().enumerate() {
        truth_tops.push(TreetopCandidate {
            row: t.row,
            col: t.col,
            dsm_height: dsm.get(t.row, t.col),
            above_ground: t.apex_height,
            crown_diameter: 2.0 * t.radius_px * cell,
        });
        debug_assert_eq!(class[t.row * w + t.col], Class::Tree(i));
    }
    for r in 0..h {
        for c in 0..w {
            if let Class::Tree(i) = class[r * w + c] {
                truth_crowns[i].push((r, c));
            }
        }
    }
    // every truth apex is the unique maximum of its crown footprint
    for (i, t) in trees.iter().enumerate() {
        let apex = dsm.get(t.row, t.col);
        for &(r, c) in &truth_crowns[i] {
            if (r, c) != (t.row, t.col) && dsm.get(r, c) >= apex {
                return Err(Error::Internal(format!(
                    "crown {} pixel ({}, {}) is not below its apex",
                    i, r, c
                )));
            }
        }
    }

    // --- multispectral bands -------------------------------------------------
    let mut bands: Vec<Grid> = (0..8).map(|_| dsm.like(0.0)).collect();
    for r in 0..h {
        for c in 0..w {
            let (base, scale): (&[f64; 8], f64) = match class[r * w + c] {
                Class::Ground => (&GROUND_SPECTRUM, 1.0),
                Class::Shrub => (&SHRUB_SPECTRUM, 1.0),
                Class::Roof => (&ROOF_SPECTRUM, 1.0),
                Class::Grass => (&GRASS_SPECTRUM, 1.0 + grass_texture.at(r / 8, c / 8) - 0.06),
                Class::Tree(i) => {
                    let t = &trees[i];
                    let d = ((r as f64 - t.row as f64).powi(2) + (c as f64 - t.col as f64).powi(2))
                        .sqrt();
                    let shade = 1.0 + 0.15 * (1.0 - (d / t.radius_px).powi(2)).max(0.0);
                    (&TREE_SPECTRUM, t.spectral_factor * shade)
                }
            };
            for (b, band) in bands.iter_mut().enumerate() {
                let noise = 0.004 * rng.gaussian();
                band.set(r, c, (base[b] * scale + noise).max(0.0));
            }
        }
    }
    let mut raster = MultibandRaster::new(bands.remove(0));
    for band in bands {
        raster.push_band(band)?;
    }
    raster.assign_role(BandRole::Red, RED_BAND)?;
    raster.assign_role(BandRole::Nir, NIR_BAND)?;

    // --- DSM noise ------------------------------------------------------------
    if spec.noise_sigma > 0.0 {
        for i in 0..dsm.len() {
            let n = spec.noise_sigma * rng.gaussian();
            dsm.values_mut()[i] += n;
        }
    }

    Ok(Scene {
        dsm,
        raster,
        truth_tops,
        truth_crowns,
    })
}

/// Builds the crown polygon document for a scene's ground truth, in the
/// same format the pipeline emits and evaluation ingests.
pub fn truth_crown_document(scene: &Scene) -> Result<crate::io::CrownDocument> {
    let dsm = &scene.dsm;
    let mut doc = crate::io::CrownDocument {
        width: dsm.width(),
        height: dsm.height(),
        cell_size: dsm.cell_size(),
        origin: [dsm.origin().0, dsm.origin().1],
        crowns: Vec::with_capacity(scene.truth_crowns.len()),
    };
    for (i, (crown, top)) in scene.truth_crowns.iter().zip(&scene.truth_tops).enumerate() {
        let ring = crate::io::trace_boundary(crown)?;
        doc.crowns.push(crate::io::CrownPolygon {
            id: i as u32 + 1,
            area_m2: crown.len() as f64 * dsm.cell_size() * dsm.cell_size(),
            top_height_m: top.above_ground,
            ring: ring.into_iter().map(|c| doc.corner_to_world(c)).collect(),
        });
    }
    Ok(doc)
}

/// Intersection area of two circles divided by the smaller circle's area.
fn lens_fraction(r1: f64, r2: f64, d: f64) -> f64 {
    let (a, b) = (r1.max(r2), r1.min(r2));
    if d >= a + b {
        return 0.0;
    }
    if d <= a - b {
        return 1.0;
    }
    let d2 = d * d;
    let alpha = ((d2 + b * b - a * a) / (2.0 * d * b))
        .clamp(-1.0, 1.0)
        .acos();
    let beta = ((d2 + a * a - b * b) / (2.0 * d * a))
        .clamp(-1.0, 1.0)
        .acos();
    let lens =
        b * b * (alpha - alpha.sin() * alpha.cos()) + a * a * (beta - beta.sin() * beta.cos());
    lens / (std::f64::consts::PI * b * b)
}
