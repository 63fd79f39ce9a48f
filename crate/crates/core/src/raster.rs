//! Raster containers: single-band grids, multiband stacks, boolean masks,
//! and band math (NDVI).
//!
//! Grids are row-major with row 0 as the northernmost row. World
//! coordinates use the pixel-center convention: the center of pixel
//! `(row, col)` is at `origin + (col + 0.5, height - row - 0.5) * cell_size`
//! where `origin` is the lower-left corner of the grid extent.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Default nodata sentinel for newly created grids.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Single-band 2D raster of real values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    cell_size: f64,
    /// World coordinates of the lower-left corner of the extent.
    origin: (f64, f64),
    nodata: f64,
    values: Vec<f64>,
}

impl Grid {
    /// Grid filled with a constant value. Panics on zero dimensions or a
    /// non-positive cell size; those are programming errors, not data.
    pub fn filled(width: usize, height: usize, cell_size: f64, value: f64) -> Grid {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        assert!(cell_size > 0.0, "cell size must be positive");
        Grid {
            width,
            height,
            cell_size,
            origin: (0.0, 0.0),
            nodata: DEFAULT_NODATA,
            values: vec![value; width * height],
        }
    }

    /// Grid from raw row-major values.
    pub fn from_values(
        width: usize,
        height: usize,
        cell_size: f64,
        origin: (f64, f64),
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Grid> {
        if width == 0 || height == 0 {
            return Err(Error::Input("grid dimensions must be positive".into()));
        }
        if cell_size <= 0.0 {
            return Err(Error::Input("cell size must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::Input(format!(
                "value count {} does not match {}x{} grid",
                values.len(),
                width,
                height
            )));
        }
        Ok(Grid {
            width,
            height,
            cell_size,
            origin,
            nodata,
            values,
        })
    }

    /// New grid sharing this grid's geometry, filled with `value`.
    pub fn like(&self, value: f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            cell_size: self.cell_size,
            origin: self.origin,
            nodata: self.nodata,
            values: vec![value; self.width * self.height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn set_origin(&mut self, origin: (f64, f64)) {
        self.origin = origin;
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn set_nodata(&mut self, nodata: f64) {
        self.nodata = nodata;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    /// Raw value, including the nodata sentinel.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.idx(row, col);
        self.values[i] = value;
    }

    #[inline]
    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == self.nodata
    }

    /// Value at `(row, col)`, or `None` when out of bounds or nodata.
    #[inline]
    pub fn value(&self, row: isize, col: isize) -> Option<f64> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return None;
        }
        let v = self.values[row as usize * self.width + col as usize];
        if v == self.nodata {
            None
        } else {
            Some(v)
        }
    }

    #[inline]
    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// World x of the pixel-center of column `col`.
    pub fn world_x(&self, col: usize) -> f64 {
        self.origin.0 + (col as f64 + 0.5) * self.cell_size
    }

    /// World y of the pixel-center of row `row` (row 0 is northernmost).
    pub fn world_y(&self, row: usize) -> f64 {
        self.origin.1 + (self.height as f64 - row as f64 - 0.5) * self.cell_size
    }

    /// Exact geometry match: dimensions, cell size, and origin.
    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.cell_size == other.cell_size
            && self.origin == other.origin
    }

    /// Minimum and maximum over non-nodata cells, `None` if all nodata.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for &v in &self.values {
            if v == self.nodata {
                continue;
            }
            out = Some(match out {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            });
        }
        out
    }

    /// Number of non-nodata cells.
    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != self.nodata).count()
    }
}

/// Semantic role of a band within a multiband raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BandRole {
    Red,
    Nir,
}

impl BandRole {
    pub fn name(&self) -> &'static str {
        match self {
            BandRole::Red => "RED",
            BandRole::Nir => "NIR",
        }
    }

    pub fn parse(s: &str) -> Option<BandRole> {
        match s.to_ascii_uppercase().as_str() {
            "RED" => Some(BandRole::Red),
            "NIR" => Some(BandRole::Nir),
            _ => None,
        }
    }
}

/// N co-registered bands sharing one grid geometry.
#[derive(Debug, Clone)]
pub struct MultibandRaster {
    bands: Vec<Grid>,
    roles: BTreeMap<BandRole, usize>,
}

impl MultibandRaster {
    pub fn new(first_band: Grid) -> MultibandRaster {
        MultibandRaster {
            bands: vec![first_band],
            roles: BTreeMap::new(),
        }
    }

    /// Appends a band; its geometry must match the existing bands exactly.
    pub fn push_band(&mut self, band: Grid) -> Result<()> {
        if !self.bands[0].same_geometry(&band) {
            return Err(Error::Input(
                "band geometry does not match the raster".into(),
            ));
        }
        self.bands.push(band);
        Ok(())
    }

    pub fn assign_role(&mut self, role: BandRole, band_index: usize) -> Result<()> {
        if band_index >= self.bands.len() {
            return Err(Error::Config(format!(
                "band index {} for role {} out of range ({} bands)",
                band_index,
                role.name(),
                self.bands.len()
            )));
        }
        self.roles.insert(role, band_index);
        Ok(())
    }

    pub fn role_index(&self, role: BandRole) -> Option<usize> {
        self.roles.get(&role).copied()
    }

    pub fn band(&self, index: usize) -> &Grid {
        &self.bands[index]
    }

    pub fn bands(&self) -> &[Grid] {
        &self.bands
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn cell_size(&self) -> f64 {
        self.bands[0].cell_size()
    }

    pub fn geometry(&self) -> &Grid {
        &self.bands[0]
    }

    fn role_band(&self, role: BandRole) -> Result<&Grid> {
        let idx = self
            .roles
            .get(&role)
            .ok_or_else(|| Error::Config(format!("band role {} is not assigned", role.name())))?;
        Ok(&self.bands[*idx])
    }
}

/// Boolean mask sharing a source raster's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    cell_size: f64,
    origin: (f64, f64),
    bits: Vec<bool>,
}

impl Mask {
    /// All-false mask with the geometry of `grid`.
    pub fn like(grid: &Grid) -> Mask {
        Mask {
            width: grid.width(),
            height: grid.height(),
            cell_size: grid.cell_size(),
            origin: grid.origin(),
            bits: vec![false; grid.len()],
        }
    }

    pub fn filled(grid: &Grid, value: bool) -> Mask {
        let mut m = Mask::like(grid);
        m.bits.fill(value);
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    /// `false` outside the grid.
    #[inline]
    pub fn get_checked(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            return false;
        }
        self.bits[row as usize * self.width + col as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn matches_geometry(&self, grid: &Grid) -> bool {
        self.width == grid.width()
            && self.height == grid.height()
            && self.cell_size == grid.cell_size()
            && self.origin == grid.origin()
    }

    /// 0/1 grid with the mask's geometry, for writing to disk.
    pub fn to_grid(&self) -> Grid {
        let values = self
            .bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Grid::from_values(
            self.width,
            self.height,
            self.cell_size,
            self.origin,
            DEFAULT_NODATA,
            values,
        )
        .expect("mask geometry is valid")
    }
}

/// Normalized difference vegetation index, `(NIR - RED) / (NIR + RED)`.
///
/// Pixels where either band is nodata, or where `NIR + RED == 0`, become
/// nodata in the output.
pub fn ndvi(raster: &MultibandRaster) -> Result<Grid> {
    let red = raster.role_band(BandRole::Red)?;
    let nir = raster.role_band(BandRole::Nir)?;
    let mut out = red.like(red.nodata());
    for row in 0..red.height() {
        for col in 0..red.width() {
            let (r, n) = match (
                red.value(row as isize, col as isize),
                nir.value(row as isize, col as isize),
            ) {
                (Some(r), Some(n)) => (r, n),
                _ => continue,
            };
            let sum = n + r;
            if sum == 0.0 {
                continue;
            }
            out.set(row, col, (n - r) / sum);
        }
    }
    Ok(out)
}

/// Threshold an NDVI grid: bit set iff `NDVI > mu` (strict) and not nodata.
pub fn vegetation_mask(ndvi: &Grid, mu: f64) -> Mask {
    let mut mask = Mask::like(ndvi);
    for row in 0..ndvi.height() {
        for col in 0..ndvi.width() {
            if let Some(v) = ndvi.value(row as isize, col as isize) {
                if v > mu {
                    mask.set(row, col, true);
                }
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_band(nir_val: f64, red_val: f64) -> MultibandRaster {
        let red = Grid::filled(4, 3, 0.5, red_val);
        let nir = Grid::filled(4, 3, 0.5, nir_val);
        let mut raster = MultibandRaster::new(red);
        raster.push_band(nir).unwrap();
        raster.assign_role(BandRole::Red, 0).unwrap();
        raster.assign_role(BandRole::Nir, 1).unwrap();
        raster
    }

    #[test]
    fn ndvi_symmetric_bands_is_zero() {
        let g = ndvi(&two_band(0.4, 0.4)).unwrap();
        for &v in g.values() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn ndvi_hand_arithmetic() {
        let g = ndvi(&two_band(0.6, 0.2)).unwrap();
        for &v in g.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn ndvi_zero_sum_is_nodata() {
        let g = ndvi(&two_band(0.0, 0.0)).unwrap();
        for row in 0..g.height() {
            for col in 0..g.width() {
                assert!(g.is_nodata(row, col));
            }
        }
    }

    #[test]
    fn ndvi_requires_roles() {
        let raster = MultibandRaster::new(Grid::filled(2, 2, 1.0, 0.3));
        match ndvi(&raster) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn ndvi_output_in_unit_range() {
        // Random-ish non-negative bands: every valid output must lie in [-1, 1].
        let mut red = Grid::filled(16, 16, 1.0, 0.0);
        let mut nir = Grid::filled(16, 16, 1.0, 0.0);
        let mut x = 1u64;
        for row in 0..16 {
            for col in 0..16 {
                x = x
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                red.set(row, col, (x >> 40) as f64 / (1u64 << 24) as f64);
                x = x
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                nir.set(row, col, (x >> 40) as f64 / (1u64 << 24) as f64);
            }
        }
        let mut raster = MultibandRaster::new(red);
        raster.push_band(nir).unwrap();
        raster.assign_role(BandRole::Red, 0).unwrap();
        raster.assign_role(BandRole::Nir, 1).unwrap();
        let g = ndvi(&raster).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                if let Some(v) = g.value(row, col) {
                    assert!((-1.0..=1.0).contains(&v), "NDVI {} outside [-1,1]", v);
                }
            }
        }
    }

    #[test]
    fn vegetation_mask_threshold_is_strict() {
        let all_high = ndvi(&two_band(0.6, 0.2)).unwrap(); // 0.5 everywhere
        assert_eq!(vegetation_mask(&all_high, 0.3).count(), all_high.len());
        // Exactly at the threshold: strict inequality keeps everything out.
        let mut at_mu = all_high.clone();
        at_mu.values_mut().fill(0.3);
        assert_eq!(vegetation_mask(&at_mu, 0.3).count(), 0);
    }

    #[test]
    fn vegetation_mask_checkerboard() {
        let mut g = Grid::filled(8, 8, 1.0, 0.1);
        for row in 0..8 {
            for col in 0..8 {
                if (row + col) % 2 == 0 {
                    g.set(row, col, 0.5);
                }
            }
        }
        let m = vegetation_mask(&g, 0.3);
        for row in 0..8 {
            for col in 0..8 {
                assert_eq!(m.get(row, col), (row + col) % 2 == 0);
            }
        }
    }

    #[test]
    fn vegetation_mask_monotone_in_mu() {
        let mut g = Grid::filled(10, 10, 1.0, 0.0);
        let mut x = 7u64;
        for i in 0..g.len() {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            g.values_mut()[i] = (x >> 40) as f64 / (1u64 << 23) as f64 - 1.0;
        }
        let mut prev = vegetation_mask(&g, -1.0);
        for step in 0..20 {
            let mu = -1.0 + 0.1 * (step as f64 + 1.0);
            let next = vegetation_mask(&g, mu);
            for i in 0..g.len() {
                assert!(
                    !next.bits()[i] || prev.bits()[i],
                    "raising mu added a pixel"
                );
            }
            prev = next;
        }
    }

    #[test]
    fn grid_world_coordinates_pixel_center() {
        let mut g = Grid::filled(4, 2, 0.5, 0.0);
        g.set_origin((100.0, 200.0));
        assert_eq!(g.world_x(0), 100.25);
        assert_eq!(g.world_x(3), 101.75);
        // row 0 is the northernmost row
        assert_eq!(g.world_y(0), 200.75);
        assert_eq!(g.world_y(1), 200.25);
    }

    #[test]
    fn push_band_rejects_mismatched_geometry() {
        let mut raster = MultibandRaster::new(Grid::filled(4, 4, 1.0, 0.0));
        assert!(raster.push_band(Grid::filled(4, 5, 1.0, 0.0)).is_err());
        assert!(raster.push_band(Grid::filled(4, 4, 2.0, 0.0)).is_err());
    }
}
