//! Crown polygon JSON document: one boundary ring per crown segment,
//! traced along pixel edges, in world coordinates.
//!
//! The document is self-contained: it carries the grid geometry so rings
//! can be rasterized back to pixel sets without the source raster. Tracing
//! follows the outer boundary with the region kept on the inside; regions
//! that are 8-connected only through a diagonal are traced as a single
//! self-touching ring, which even-odd rasterization fills correctly.
//! Interior holes are not represented (a single ring per crown) and are
//! filled on rasterization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrownDocument {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    /// World coordinates of the lower-left corner of the grid extent.
    pub origin: [f64; 2],
    pub crowns: Vec<CrownPolygon>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrownPolygon {
    pub id: u32,
    pub area_m2: f64,
    pub top_height_m: f64,
    /// Closed ring in world coordinates (last point repeats the first).
    pub ring: Vec<[f64; 2]>,
}

impl CrownDocument {
    /// World coordinates of a pixel-corner point `(row, col)` where corner
    /// (0, 0) is the northwest corner of the grid.
    pub fn corner_to_world(&self, corner: (usize, usize)) -> [f64; 2] {
        [
            self.origin[0] + corner.1 as f64 * self.cell_size,
            self.origin[1] + (self.height - corner.0) as f64 * self.cell_size,
        ]
    }

    fn world_to_corner_space(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.height as f64 - (p[1] - self.origin[1]) / self.cell_size,
            (p[0] - self.origin[0]) / self.cell_size,
        )
    }

    /// Rasterizes one crown's ring back to the set of pixels whose centers
    /// fall inside the ring (even-odd rule).
    pub fn rasterize(&self, polygon: &CrownPolygon) -> Vec<(usize, usize)> {
        let corners: Vec<(f64, f64)> = polygon
            .ring
            .iter()
            .map(|&p| self.world_to_corner_space(p))
            .collect();
        rasterize_ring(&corners, self.width, self.height)
    }
}

pub fn write_crown_document(path: &Path, doc: &CrownDocument) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let json = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Internal(format!("crown document serialization failed: {}", e)))?;
    w.write_all(json.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_crown_document(path: &Path) -> Result<CrownDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Edge-walking directions in (row, col) corner space.
const EAST: u8 = 0;
const SOUTH: u8 = 1;
const WEST: u8 = 2;
const NORTH: u8 = 3;

fn step(corner: (i64, i64), dir: u8) -> (i64, i64) {
    match dir {
        EAST => (corner.0, corner.1 + 1),
        SOUTH => (corner.0 + 1, corner.1),
        WEST => (corner.0, corner.1 - 1),
        _ => (corner.0 - 1, corner.1),
    }
}

/// Traces the outer boundary of a pixel region as a closed loop of pixel
/// corners `(row, col)`, clockwise in (row, col) space. The region must be
/// 8-connected; at diagonal pinch corners the trace crosses into the
/// diagonal neighbour so the whole region stays on one ring.
pub fn trace_boundary(pixels: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    if pixels.is_empty() {
        return Err(Error::Input("cannot trace an empty pixel set".into()));
    }
    let set: std::collections::HashSet<(i64, i64)> =
        pixels.iter().map(|&(r, c)| (r as i64, c as i64)).collect();
    let inside = |r: i64, c: i64| set.contains(&(r, c));

    // Directed boundary edges keyed by start corner; direction chosen so the
    // region is on the left of travel (clockwise outer ring in row/col space).
    let mut edges: HashMap<(i64, i64), Vec<u8>> = HashMap::new();
    for &(r, c) in &set {
        if !inside(r - 1, c) {
            edges.entry((r, c + 1)).or_default().push(WEST);
        }
        if !inside(r + 1, c) {
            edges.entry((r + 1, c)).or_default().push(EAST);
        }
        if !inside(r, c - 1) {
            edges.entry((r, c)).or_default().push(SOUTH);
        }
        if !inside(r, c + 1) {
            edges.entry((r + 1, c + 1)).or_default().push(NORTH);
        }
    }

    // Start at the top-left corner of the first pixel in row-major order;
    // that corner has exactly one outgoing edge (heading south).
    let start = *set
        .iter()
        .min_by_key(|&&(r, c)| (r, c))
        .expect("nonempty set");
    let start_corner = (start.0, start.1);

    let mut ring: Vec<(usize, usize)> = Vec::new();
    let mut corner = start_corner;
    let mut dir = SOUTH;
    let cap = 4 * pixels.len() + 8;
    loop {
        ring.push((corner.0 as usize, corner.1 as usize));
        if ring.len() > cap {
            return Err(Error::Internal(
                "boundary trace exceeded its step cap".into(),
            ));
        }
        corner = step(corner, dir);
        if corner == start_corner {
            break;
        }
        let candidates = edges
            .get(&corner)
            .ok_or_else(|| Error::Internal("boundary trace left the edge set".into()))?;
        // Prefer the sharpest right turn relative to the incoming direction;
        // this routes the walk across diagonal pinch corners.
        dir = *candidates
            .iter()
            .min_by_key(|&&d| (4 + d - dir) % 4)
            .ok_or_else(|| Error::Internal("dangling boundary corner".into()))?;
    }
    ring.push((start_corner.0 as usize, start_corner.1 as usize));
    Ok(compress_collinear(ring))
}

/// Drops interior ring vertices that continue in the same direction.
fn compress_collinear(ring: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    if ring.len() < 3 {
        return ring;
    }
    let mut out = Vec::with_capacity(ring.len());
    out.push(ring[0]);
    for i in 1..ring.len() - 1 {
        let a = *out.last().unwrap();
        let b = ring[i];
        let c = ring[i + 1];
        let d1 = (b.0 as i64 - a.0 as i64).signum() * 3 + (b.1 as i64 - a.1 as i64).signum();
        let d2 = (c.0 as i64 - b.0 as i64).signum() * 3 + (c.1 as i64 - b.1 as i64).signum();
        if d1 != d2 {
            out.push(b);
        }
    }
    out.push(*ring.last().unwrap());
    out
}

/// Pixels whose centers lie inside a closed ring given in (row, col) corner
/// space, by even-odd counting. Restricted to the `width` x `height` grid.
pub fn rasterize_ring(ring: &[(f64, f64)], width: usize, height: usize) -> Vec<(usize, usize)> {
    if ring.len() < 4 {
        return Vec::new();
    }
    let min_r = ring.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_r = ring.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_c = ring.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_c = ring.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    let r0 = min_r.floor().max(0.0) as usize;
    let r1 = (max_r.ceil() as usize).min(height);
    let c0 = min_c.floor().max(0.0) as usize;
    let c1 = (max_c.ceil() as usize).min(width);

    let mut out = Vec::new();
    for row in r0..r1 {
        for col in c0..c1 {
            let py = row as f64 + 0.5;
            let px = col as f64 + 0.5;
            let mut crossings = 0u32;
            for w in ring.windows(2) {
                let (y1, x1) = w[0];
                let (y2, x2) = w[1];
                if (y1 > py) != (y2 > py) {
                    let t = (py - y1) / (y2 - y1);
                    let x = x1 + t * (x2 - x1);
                    if px < x {
                        crossings += 1;
                    }
                }
            }
            if crossings % 2 == 1 {
                out.push((row, col));
            }
        }
    }
    out
}
