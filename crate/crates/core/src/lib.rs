//! Individual tree detection and crown delineation from satellite-derived
//! digital surface models and multispectral orthophotos.
//!
//! The pipeline detects treetops as local maxima of the DSM via a grey-level
//! top-hat by reconstruction, filters them with an above-ground height check
//! and allometric non-maximum suppression, and delineates one crown per
//! treetop with a seeded superpixel assignment that mixes horizontal,
//! vertical, and spectral distances. A cloth-simulation terrain filter
//! supplies the ground reference, and an evaluation harness scores crown
//! sets against references with one-to-one Dice-overlap matching.
//!
//! Modules follow the processing order:
//!
//! * [`raster`] — grids, multiband rasters, masks, NDVI
//! * [`io`] — ASCII grid / manifest / CSV / crown polygon formats
//! * [`morphology`] — erosion, dilation, opening, reconstruction, top-hat
//! * [`labeling`] — connected component labeling
//! * [`terrain`] — cloth simulation filter and above-ground heights
//! * [`treetops`] — detectors, height filter, non-maximum suppression
//! * [`crowns`] — superpixel delineation and postprocessing
//! * [`eval`] — crown matching and accuracy metrics
//! * [`synth`] — deterministic synthetic scene generator
//! * [`pipeline`] — end-to-end orchestration and artifact emission

pub mod crowns;
pub mod error;
pub mod eval;
pub mod io;
pub mod labeling;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod terrain;
pub mod treetops;

pub use crowns::{CrownSegment, SegmentationParams};
pub use error::{Error, Result};
pub use eval::MatchReport;
pub use raster::{BandRole, Grid, Mask, MultibandRaster};
pub use synth::{DensityMode, Scene, SceneSpec};
pub use terrain::{CsfParams, HeightMode};
pub use treetops::{DetectorKind, TreetopCandidate};
