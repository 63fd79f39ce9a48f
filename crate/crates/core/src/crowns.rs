//! Crown delineation: every vegetation pixel is assigned to the treetop
//! with the smallest mixed spatial/vertical/spectral kernel distance, or to
//! no tree when that minimum exceeds the cutoff. Two postprocessing
//! criteria then drop implausible crowns: a treetop too far from its
//! segment centroid, and a crown whose area is a three-sigma outlier among
//! its neighbors.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::raster::{Grid, Mask, MultibandRaster};
use crate::treetops::TreetopCandidate;

/// Kernel weights and cutoff. With `theta` unset, the cutoff defaults to
/// `w_h + 0.3 * w_v + 0.5 * w_c`.
#[derive(Debug, Clone)]
pub struct SegmentationParams {
    pub w_h: f64,
    pub w_v: f64,
    pub w_c: f64,
    pub theta: Option<f64>,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            w_h: 0.8,
            w_v: 1.0,
            w_c: 0.5,
            theta: None,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if self.w_h < 0.0 || self.w_v < 0.0 || self.w_c < 0.0 {
            return Err(Error::Config("kernel weights must be non-negative".into()));
        }
        if let Some(t) = self.theta {
            if t < 0.0 || !t.is_finite() {
                return Err(Error::Config("theta must be a non-negative number".into()));
            }
        }
        Ok(())
    }

    pub fn effective_theta(&self) -> f64 {
        self.theta
            .unwrap_or(self.w_h + 0.3 * self.w_v + 0.5 * self.w_c)
    }
}

/// Per-scene normalization ranges for the kernel distance.
#[derive(Debug, Clone)]
pub struct SceneNorms {
    /// Vertical range: 95th percentile of the treetops' above-ground heights.
    pub norm_v: f64,
    /// Per-band spectral range (max - min) over vegetation pixels.
    pub norm_c: Vec<f64>,
}

/// Computes the normalization ranges from the resolved treetop set and the
/// vegetation pixels of the scene.
pub fn scene_norms(tops: &[TreetopCandidate], raster: &MultibandRaster, veg: &Mask) -> SceneNorms {
    let mut heights: Vec<f64> = tops
        .iter()
        .map(|t| t.above_ground)
        .filter(|h| h.is_finite() && *h > 0.0)
        .collect();
    heights.sort_by(f64::total_cmp);
    let norm_v = if heights.is_empty() {
        1.0
    } else {
        let idx = ((heights.len() as f64 - 1.0) * 0.95).round() as usize;
        heights[idx].max(1e-9)
    };

    let mut norm_c = Vec::with_capacity(raster.band_count());
    for b in 0..raster.band_count() {
        let band = raster.band(b);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..band.height() {
            for c in 0..band.width() {
                if !veg.get(r, c) {
                    continue;
                }
                if let Some(v) = band.value(r as isize, c as isize) {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        norm_c.push(if hi > lo { hi - lo } else { 1e-9 });
    }
    SceneNorms { norm_v, norm_c }
}

/// Mixed kernel distance between a treetop and a test pixel:
/// `w_h * D_h + w_v * D_v + w_c * D_c`, each component normalized and
/// clamped to [0, 1]. The horizontal range is the treetop's allometric
/// crown radius. Nodata at the pixel makes the distance infinite.
pub fn kernel_distance(
    top: &TreetopCandidate,
    pixel: (usize, usize),
    dsm: &Grid,
    raster: &MultibandRaster,
    norms: &SceneNorms,
    params: &SegmentationParams,
) -> f64 {
    let cell = dsm.cell_size();
    let (pr, pc) = pixel;

    let dr = top.row as f64 - pr as f64;
    let dc = top.col as f64 - pc as f64;
    let dist_m = (dr * dr + dc * dc).sqrt() * cell;
    let norm_h = (top.crown_diameter / 2.0).max(1e-9);
    let d_h = (dist_m / norm_h).clamp(0.0, 1.0);

    let mut d = params.w_h * d_h;

    if params.w_v > 0.0 {
        let pv = match dsm.value(pr as isize, pc as isize) {
            Some(v) => v,
            None => return f64::INFINITY,
        };
        let d_v = ((top.dsm_height - pv).abs() / norms.norm_v).clamp(0.0, 1.0);
        d += params.w_v * d_v;
    }

    if params.w_c > 0.0 {
        let mut sum = 0.0;
        for b in 0..raster.band_count() {
            let band = raster.band(b);
            let tv = match band.value(top.row as isize, top.col as isize) {
                Some(v) => v,
                None => return f64::INFINITY,
            };
            let pv = match band.value(pr as isize, pc as isize) {
                Some(v) => v,
                None => return f64::INFINITY,
            };
            let nd = (tv - pv) / norms.norm_c[b];
            sum += nd * nd;
        }
        let d_c = (sum / raster.band_count() as f64).sqrt().clamp(0.0, 1.0);
        d += params.w_c * d_c;
    }
    d
}

/// A delineated crown owned by exactly one treetop.
#[derive(Debug, Clone)]
pub struct CrownSegment {
    /// 1-based id matching the owning treetop's position in the input list.
    pub treetop_id: u32,
    pub top_pixel: (usize, usize),
    pub pixels: Vec<(usize, usize)>,
    pub area_m2: f64,
    /// Mean pixel position (row, col).
    pub centroid: (f64, f64),
    /// Maximum pairwise distance between segment pixel centers, meters.
    pub largest_diameter_m: f64,
    /// `2 * sqrt(area / pi)`, meters.
    pub equivalent_diameter_m: f64,
}

/// Raw per-pixel assignment, before connectivity cleanup: each vegetation
/// pixel within `2 * crown_diameter` of a treetop takes the label (treetop
/// index + 1) minimizing the kernel distance, when that minimum is at most
/// theta; ties go to the smaller id. Everything else stays 0.
pub fn assign_labels(
    tops: &[TreetopCandidate],
    dsm: &Grid,
    raster: &MultibandRaster,
    veg: &Mask,
    params: &SegmentationParams,
    norms: &SceneNorms,
) -> Result<Vec<u32>> {
    params.validate()?;
    let mut seen = HashSet::new();
    for t in tops {
        if !seen.insert((t.row, t.col)) {
            return Err(Error::Input(format!(
                "duplicate treetop pixel ({}, {})",
                t.row, t.col
            )));
        }
    }

    let theta = params.effective_theta();
    let cell = dsm.cell_size();
    let w = dsm.width();
    let h = dsm.height();
    let mut best_d = vec![f64::INFINITY; w * h];
    let mut labels = vec![0u32; w * h];

    for (i, top) in tops.iter().enumerate() {
        let id = i as u32 + 1;
        let reach_m = 2.0 * top.crown_diameter;
        let reach_px = (reach_m / cell).ceil() as isize;
        let r0 = (top.row as isize - reach_px).max(0) as usize;
        let r1 = ((top.row as isize + reach_px) as usize).min(h - 1);
        let c0 = (top.col as isize - reach_px).max(0) as usize;
        let c1 = ((top.col as isize + reach_px) as usize).min(w - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if !veg.get(r, c) {
                    continue;
                }
                let dr = (top.row as f64 - r as f64) * cell;
                let dc = (top.col as f64 - c as f64) * cell;
                if dr * dr + dc * dc > reach_m * reach_m {
                    continue;
                }
                let d = kernel_distance(top, (r, c), dsm, raster, norms, params);
                if d > theta {
                    continue;
                }
                let k = r * w + c;
                if d < best_d[k] {
                    best_d[k] = d;
                    labels[k] = id;
                }
            }
        }
    }
    Ok(labels)
}

/// Full delineation: raw assignment, then each label is reduced to the
/// 8-connected component containing its treetop (disconnected fragments
/// return to label 0), then segments are measured.
pub fn delineate(
    tops: &[TreetopCandidate],
    dsm: &Grid,
    raster: &MultibandRaster,
    veg: &Mask,
    params: &SegmentationParams,
    norms: &SceneNorms,
) -> Result<(Vec<u32>, Vec<CrownSegment>)> {
    let raw = assign_labels(tops, dsm, raster, veg, params, norms)?;
    let w = dsm.width();
    let h = dsm.height();

    let mut cleaned = vec![0u32; w * h];
    let mut segments = Vec::with_capacity(tops.len());
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for (i, top) in tops.iter().enumerate() {
        let id = i as u32 + 1;
        let mut pixels: Vec<(usize, usize)> = Vec::new();
        if raw[top.row * w + top.col] == id {
            stack.push((top.row, top.col));
            cleaned[top.row * w + top.col] = id;
            while let Some((r, c)) = stack.pop() {
                pixels.push((r, c));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let rr = r as i64 + dr;
                        let cc = c as i64 + dc;
                        if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                            continue;
                        }
                        let k = rr as usize * w + cc as usize;
                        if raw[k] == id && cleaned[k] == 0 {
                            cleaned[k] = id;
                            stack.push((rr as usize, cc as usize));
                        }
                    }
                }
            }
        }
        if !pixels.is_empty() {
            pixels.sort_unstable();
            segments.push(measure_segment(
                id,
                (top.row, top.col),
                pixels,
                dsm.cell_size(),
            ));
        }
    }
    Ok((cleaned, segments))
}

fn measure_segment(
    id: u32,
    top_pixel: (usize, usize),
    pixels: Vec<(usize, usize)>,
    cell: f64,
) -> CrownSegment {
    let n = pixels.len() as f64;
    let mut sr = 0.0;
    let mut sc = 0.0;
    for &(r, c) in &pixels {
        sr += r as f64;
        sc += c as f64;
    }
    let area = n * cell * cell;
    CrownSegment {
        treetop_id: id,
        top_pixel,
        largest_diameter_m: largest_diameter(&pixels) * cell,
        equivalent_diameter_m: 2.0 * (area / std::f64::consts::PI).sqrt(),
        area_m2: area,
        centroid: (sr / n, sc / n),
        pixels,
    }
}

/// Maximum pairwise distance between pixel centers, in pixels, computed
/// over the convex hull vertices.
fn largest_diameter(pixels: &[(usize, usize)]) -> f64 {
    if pixels.len() <= 1 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = pixels.iter().map(|&(r, c)| (r as f64, c as f64)).collect();
    let hull = convex_hull(&pts);
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dr = hull[i].0 - hull[j].0;
            let dc = hull[i].1 - hull[j].1;
            best = best.max(dr * dr + dc * dc);
        }
    }
    best.sqrt()
}

/// Andrew's monotone chain; input need not be sorted.
fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter().chain(pts.iter().rev()) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Treetop-centrality criterion: the treetop must lie within one third of
/// the segment's largest diameter from the segment centroid.
pub fn center_check(segment: &CrownSegment, cell: f64) -> bool {
    let dr = segment.top_pixel.0 as f64 - segment.centroid.0;
    let dc = segment.top_pixel.1 as f64 - segment.centroid.1;
    let dist_m = (dr * dr + dc * dc).sqrt() * cell;
    dist_m <= segment.largest_diameter_m / 3.0
}

/// Crown-size coherence: a segment is dropped when its area deviates from
/// the mean neighborhood area (its own plus the segments whose treetops lie
/// within `neighborhood_radius_m`) by more than three standard deviations.
/// Segments with fewer than three neighbors are always kept.
pub fn size_coherence_filter(
    segments: &[CrownSegment],
    neighborhood_radius_m: f64,
    cell: f64,
) -> Vec<CrownSegment> {
    segments
        .iter()
        .zip(size_coherence_keep(segments, neighborhood_radius_m, cell))
        .filter_map(|(s, keep)| if keep { Some(s.clone()) } else { None })
        .collect()
}

fn size_coherence_keep(
    segments: &[CrownSegment],
    neighborhood_radius_m: f64,
    cell: f64,
) -> Vec<bool> {
    let radius2 = (neighborhood_radius_m / cell).powi(2);
    let mut keep = vec![true; segments.len()];
    for (i, seg) in segments.iter().enumerate() {
        // the segment itself belongs to its neighborhood sample; a
        // leave-one-out sigma over a handful of neighbors is so tight that
        // it rejects ordinary locally-tall trees
        let mut areas: Vec<f64> = vec![seg.area_m2];
        for (j, other) in segments.iter().enumerate() {
            if i == j {
                continue;
            }
            let dr = seg.top_pixel.0 as f64 - other.top_pixel.0 as f64;
            let dc = seg.top_pixel.1 as f64 - other.top_pixel.1 as f64;
            if dr * dr + dc * dc <= radius2 {
                areas.push(other.area_m2);
            }
        }
        if areas.len() < 4 {
            continue; // fewer than three neighbors
        }
        let n = areas.len() as f64;
        let mean = areas.iter().sum::<f64>() / n;
        let var = areas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        if (seg.area_m2 - mean).abs() > 3.0 * var.sqrt() {
            keep[i] = false;
        }
    }
    keep
}

/// Postprocessing parameters.
#[derive(Debug, Clone)]
pub struct PostprocessParams {
    pub neighborhood_radius_m: f64,
}

impl Default for PostprocessParams {
    fn default() -> Self {
        PostprocessParams {
            neighborhood_radius_m: 30.0,
        }
    }
}

/// Applies the centrality criterion and then the size-coherence filter,
/// keeping segments and their treetops paired by id.
pub fn postprocess(
    segments: Vec<CrownSegment>,
    tops: Vec<TreetopCandidate>,
    params: &PostprocessParams,
    cell: f64,
) -> (Vec<CrownSegment>, Vec<TreetopCandidate>) {
    let centered: Vec<CrownSegment> = segments
        .into_iter()
        .filter(|s| center_check(s, cell))
        .collect();
    let survivors = size_coherence_filter(&centered, params.neighborhood_radius_m, cell);
    let kept_ids: HashSet<u32> = survivors.iter().map(|s| s.treetop_id).collect();
    let kept_tops = tops
        .into_iter()
        .enumerate()
        .filter_map(|(i, t)| {
            if kept_ids.contains(&(i as u32 + 1)) {
                Some(t)
            } else {
                None
            }
        })
        .collect();
    (survivors, kept_tops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BandRole;
    use crate::treetops::allometric_diameter;

    fn top_at(row: usize, col: usize, dsm_height: f64, above: f64) -> TreetopCandidate {
        TreetopCandidate {
            row,
            col,
            dsm_height,
            above_ground: above,
            crown_diameter: allometric_diameter(above).unwrap(),
        }
    }

    /// Uniform two-band raster where every pixel shares one spectrum.
    fn flat_raster(width: usize, height: usize, cell: f64) -> MultibandRaster {
        let mut raster = MultibandRaster::new(Grid::filled(width, height, cell, 0.2));
        raster
            .push_band(Grid::filled(width, height, cell, 0.6))
            .unwrap();
        raster.assign_role(BandRole::Red, 0).unwrap();
        raster.assign_role(BandRole::Nir, 1).unwrap();
        raster
    }

    fn uniform_norms(bands: usize) -> SceneNorms {
        SceneNorms {
            norm_v: 10.0,
            norm_c: vec![1.0; bands],
        }
    }

    #[test]
    fn kernel_distance_zero_at_treetop() {
        let cell = 0.5;
        let dsm = Grid::filled(16, 16, cell, 12.0);
        let raster = flat_raster(16, 16, cell);
        let top = top_at(8, 8, 12.0, 10.0);
        let d = kernel_distance(
            &top,
            (8, 8),
            &dsm,
            &raster,
            &uniform_norms(2),
            &SegmentationParams::default(),
        );
        assert_eq!(d, 0.0);
    }

    #[test]
    fn kernel_distance_horizontal_component() {
        // offset exactly one crown radius with equal height and spectrum:
        // only D_h = 1 contributes, weighted 0.8
        let cell = 0.5;
        let dsm = Grid::filled(64, 64, cell, 12.0);
        let raster = flat_raster(64, 64, cell);
        let top = top_at(32, 32, 12.0, 10.0);
        let radius_m = top.crown_diameter / 2.0;
        let offset_px = radius_m / cell; // 3.99132 m / 2 / 0.5
                                         // place the test pixel an integer offset away along the row axis and
                                         // scale the expectation accordingly
        let px = (32, 32 + offset_px.round() as usize);
        let expected = 0.8 * ((px.1 as f64 - 32.0) * cell / radius_m).min(1.0);
        let d = kernel_distance(
            &top,
            px,
            &dsm,
            &raster,
            &uniform_norms(2),
            &SegmentationParams::default(),
        );
        assert!(
            (d - expected).abs() < 1e-12,
            "got {}, expected {}",
            d,
            expected
        );
    }

    #[test]
    fn kernel_distance_vertical_component() {
        // same pixel, height gap of exactly norm_v: D = w_v * 1 = 1.0
        let cell = 0.5;
        let mut dsm = Grid::filled(16, 16, cell, 12.0);
        dsm.set(8, 8, 2.0);
        let raster = flat_raster(16, 16, cell);
        let mut top = top_at(8, 8, 12.0, 10.0);
        top.dsm_height = 12.0;
        let d = kernel_distance(
            &top,
            (8, 8),
            &dsm,
            &raster,
            &uniform_norms(2),
            &SegmentationParams::default(),
        );
        assert!((d - 1.0).abs() < 1e-12, "got {}", d);
    }

    #[test]
    fn kernel_distance_infinite_on_nodata() {
        let cell = 0.5;
        let mut dsm = Grid::filled(16, 16, cell, 12.0);
        let nd = dsm.nodata();
        dsm.set(8, 9, nd);
        let raster = flat_raster(16, 16, cell);
        let top = top_at(8, 8, 12.0, 10.0);
        let d = kernel_distance(
            &top,
            (8, 9),
            &dsm,
            &raster,
            &uniform_norms(2),
            &SegmentationParams::default(),
        );
        assert!(d.is_infinite());
    }

    fn paraboloid_scene(
        width: usize,
        height: usize,
        cell: f64,
        tops_px: &[(usize, usize, f64)],
    ) -> (Grid, MultibandRaster, Mask, Vec<TreetopCandidate>) {
        let mut dsm = Grid::filled(width, height, cell, 0.0);
        let mut veg = Mask::like(&dsm);
        let mut tops = Vec::new();
        for &(tr, tc, h) in tops_px {
            let chi = allometric_diameter(h).unwrap();
            let radius_px = chi / 2.0 / cell;
            for r in 0..height {
                for c in 0..width {
                    let d =
                        ((r as f64 - tr as f64).powi(2) + (c as f64 - tc as f64).powi(2)).sqrt();
                    if d <= radius_px {
                        let z = h * (1.0 - 0.5 * (d / radius_px).powi(2));
                        if z > dsm.get(r, c) {
                            dsm.set(r, c, z);
                        }
                        veg.set(r, c, true);
                    }
                }
            }
            tops.push(top_at(tr, tc, h, h));
        }
        let raster = flat_raster(width, height, cell);
        (dsm, raster, veg, tops)
    }

    #[test]
    fn theta_zero_keeps_only_seeds() {
        let (dsm, raster, veg, tops) = paraboloid_scene(48, 48, 0.3, &[(24, 24, 12.0)]);
        let params = SegmentationParams {
            theta: Some(0.0),
            ..Default::default()
        };
        let norms = scene_norms(&tops, &raster, &veg);
        let (labels, segments) = delineate(&tops, &dsm, &raster, &veg, &params, &norms).unwrap();
        assert_eq!(labels.iter().filter(|&&l| l > 0).count(), 1);
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].pixels, vec![(24, 24)]);
    }

    #[test]
    fn isolated_tree_covers_its_crown() {
        let cell = 0.3;
        let (dsm, raster, veg, tops) = paraboloid_scene(64, 64, cell, &[(32, 32, 12.0)]);
        let norms = scene_norms(&tops, &raster, &veg);
        let (labels, segments) = delineate(
            &tops,
            &dsm,
            &raster,
            &veg,
            &SegmentationParams::default(),
            &norms,
        )
        .unwrap();
        assert_eq!(segments.len(), 1);
        let crown_px = veg.count();
        let covered = labels.iter().filter(|&&l| l == 1).count();
        assert!(
            covered as f64 >= 0.9 * crown_px as f64,
            "covered {}/{} crown pixels",
            covered,
            crown_px
        );
        // nothing outside the vegetation mask is labeled
        for r in 0..64 {
            for c in 0..64 {
                if labels[r * 64 + c] > 0 {
                    assert!(veg.get(r, c));
                }
            }
        }
    }

    #[test]
    fn two_distant_trees_match_exhaustive_argmin() {
        let cell = 0.3;
        let (dsm, raster, veg, tops) =
            paraboloid_scene(64, 64, cell, &[(20, 16, 10.0), (44, 48, 14.0)]);
        let params = SegmentationParams::default();
        let norms = scene_norms(&tops, &raster, &veg);
        let got = assign_labels(&tops, &dsm, &raster, &veg, &params, &norms).unwrap();

        // oracle: plain nested loop over every pixel and every treetop
        let theta = params.effective_theta();
        let mut expected = vec![0u32; 64 * 64];
        for r in 0..64usize {
            for c in 0..64usize {
                if !veg.get(r, c) {
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut best_id = 0u32;
                for (i, top) in tops.iter().enumerate() {
                    let dr = (top.row as f64 - r as f64) * cell;
                    let dc = (top.col as f64 - c as f64) * cell;
                    if (dr * dr + dc * dc).sqrt() > 2.0 * top.crown_diameter {
                        continue;
                    }
                    let d = kernel_distance(top, (r, c), &dsm, &raster, &norms, &params);
                    if d <= theta && d < best {
                        best = d;
                        best_id = i as u32 + 1;
                    }
                }
                expected[r * 64 + c] = best_id;
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn theta_monotonicity_on_fixed_tops() {
        let cell = 0.3;
        let (dsm, raster, veg, tops) = paraboloid_scene(
            64,
            64,
            cell,
            &[(20, 20, 9.0), (40, 40, 13.0), (22, 44, 11.0)],
        );
        let norms = scene_norms(&tops, &raster, &veg);
        let mut prev: Option<Vec<u32>> = None;
        for theta in [0.2, 0.5, 0.9, 1.35, 2.0] {
            let params = SegmentationParams {
                theta: Some(theta),
                ..Default::default()
            };
            let (labels, _) = delineate(&tops, &dsm, &raster, &veg, &params, &norms).unwrap();
            if let Some(p) = &prev {
                for k in 0..labels.len() {
                    if p[k] > 0 {
                        assert_eq!(p[k], labels[k], "growing theta must not shrink a segment");
                    }
                }
            }
            prev = Some(labels);
        }
    }

    #[test]
    fn label_partition_is_connected_and_contains_top() {
        let cell = 0.3;
        let (dsm, raster, veg, tops) =
            paraboloid_scene(64, 64, cell, &[(20, 20, 10.0), (26, 26, 12.0)]);
        let norms = scene_norms(&tops, &raster, &veg);
        let (labels, segments) = delineate(
            &tops,
            &dsm,
            &raster,
            &veg,
            &SegmentationParams::default(),
            &norms,
        )
        .unwrap();
        for seg in &segments {
            assert!(seg.pixels.contains(&seg.top_pixel));
            // connectivity: flood fill from the top pixel must reach all pixels
            let set: std::collections::HashSet<(usize, usize)> =
                seg.pixels.iter().copied().collect();
            let mut seen = std::collections::HashSet::new();
            let mut stack = vec![seg.top_pixel];
            while let Some((r, c)) = stack.pop() {
                if !seen.insert((r, c)) {
                    continue;
                }
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let rr = r as i64 + dr;
                        let cc = c as i64 + dc;
                        if rr >= 0 && cc >= 0 && set.contains(&(rr as usize, cc as usize)) {
                            stack.push((rr as usize, cc as usize));
                        }
                    }
                }
            }
            assert_eq!(seen.len(), seg.pixels.len(), "segment must be 8-connected");
        }
        // partition: labels agree with segment pixel lists exactly
        let mut from_segments = vec![0u32; 64 * 64];
        for seg in &segments {
            for &(r, c) in &seg.pixels {
                assert_eq!(from_segments[r * 64 + c], 0, "pixel in two segments");
                from_segments[r * 64 + c] = seg.treetop_id;
            }
        }
        assert_eq!(from_segments, labels);
    }

    fn disk_segment(
        id: u32,
        center: (usize, usize),
        radius: f64,
        top: (usize, usize),
    ) -> CrownSegment {
        let mut pixels = Vec::new();
        let r0 = center.0 as f64;
        let c0 = center.1 as f64;
        for r in 0..200usize {
            for c in 0..200usize {
                if ((r as f64 - r0).powi(2) + (c as f64 - c0).powi(2)).sqrt() <= radius {
                    pixels.push((r, c));
                }
            }
        }
        measure_segment(id, top, pixels, 1.0)
    }

    #[test]
    fn center_check_examples() {
        // top at the centroid of a disk: inside one third of the diameter
        let centered = disk_segment(1, (50, 50), 10.0, (50, 50));
        assert!(center_check(&centered, 1.0));
        // top on the boundary: distance = radius = diameter/2 > diameter/3
        let edge = disk_segment(2, (50, 50), 10.0, (50, 60));
        assert!(!center_check(&edge, 1.0));
        // single-pixel segment is its own centroid
        let single = measure_segment(3, (5, 5), vec![(5, 5)], 1.0);
        assert!(center_check(&single, 1.0));
    }

    #[test]
    fn size_coherence_examples() {
        // equal areas: kept (zero deviation, zero sigma)
        let equal: Vec<CrownSegment> = (0..6)
            .map(|i| {
                disk_segment(
                    i + 1,
                    (20, 20 + 10 * i as usize),
                    4.0,
                    (20, 20 + 10 * i as usize),
                )
            })
            .collect();
        assert_eq!(size_coherence_filter(&equal, 100.0, 1.0).len(), 6);

        // ten small crowns and one huge one: the outlier is dropped
        let mut mixed: Vec<CrownSegment> = (0..10)
            .map(|i| {
                disk_segment(
                    i + 1,
                    (30, 15 * i as usize + 10),
                    3.0,
                    (30, 15 * i as usize + 10),
                )
            })
            .collect();
        mixed.push(disk_segment(11, (100, 80), 31.0, (100, 80)));
        let kept = size_coherence_filter(&mixed, 500.0, 1.0);
        assert_eq!(kept.len(), 10);
        assert!(kept.iter().all(|s| s.treetop_id != 11));

        // two isolated segments: fewer than three neighbors, both kept
        let isolated = vec![
            disk_segment(1, (20, 20), 3.0, (20, 20)),
            disk_segment(2, (180, 180), 30.0, (180, 180)),
        ];
        assert_eq!(size_coherence_filter(&isolated, 10.0, 1.0).len(), 2);
    }

    #[test]
    fn postprocess_removes_edge_top_and_is_monotone() {
        let good = disk_segment(1, (50, 50), 8.0, (50, 50));
        let edge = disk_segment(2, (50, 120), 8.0, (50, 128));
        let tops = vec![top_at(50, 50, 12.0, 10.0), top_at(50, 128, 12.0, 10.0)];
        let (segs, kept_tops) =
            postprocess(vec![good, edge], tops, &PostprocessParams::default(), 1.0);
        assert_eq!(segs.len(), 1);
        assert_eq!(kept_tops.len(), 1);
        assert_eq!(segs[0].treetop_id, 1);
        assert_eq!(kept_tops[0].row, 50);
        assert_eq!(kept_tops[0].col, 50);
    }

    #[test]
    fn postprocess_keeps_well_formed_set() {
        let segs: Vec<CrownSegment> = (0..5)
            .map(|i| {
                disk_segment(
                    i + 1,
                    (40, 25 * i as usize + 20),
                    5.0,
                    (40, 25 * i as usize + 20),
                )
            })
            .collect();
        let tops: Vec<TreetopCandidate> = (0..5)
            .map(|i| top_at(40, 25 * i as usize + 20, 12.0, 10.0))
            .collect();
        let (s, t) = postprocess(segs, tops, &PostprocessParams::default(), 1.0);
        assert_eq!(s.len(), 5);
        assert_eq!(t.len(), 5);
    }
}
