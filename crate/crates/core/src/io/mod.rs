//! File formats: ESRI-style ASCII grids, band manifests, treetop CSV,
//! metrics CSV, and crown polygon JSON documents.
//!
//! All writers are deterministic: identical in-memory inputs produce
//! byte-identical files. Floating point values are written with Rust's
//! shortest round-trip formatting, so a grid survives a write/read cycle
//! bit-exactly.

mod ascii_grid;
mod manifest;
mod polygon;
mod tables;

pub use ascii_grid::{read_grid, write_grid};
pub use manifest::{read_band_manifest, write_band_manifest};
pub use polygon::{
    rasterize_ring, read_crown_document, trace_boundary, write_crown_document, CrownDocument,
    CrownPolygon,
};
pub use tables::{
    read_treetops_csv, write_metrics_csv, write_stage_counts, write_treetops_csv, MetricsRow,
    StageCounts,
};
