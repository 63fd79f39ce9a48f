//! CSV artifacts: treetop tables, metric tables, and the per-stage
//! candidate-count log.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::MatchReport;
use crate::raster::Grid;
use crate::treetops::TreetopCandidate;

/// Writes `id,row,col,x,y,dsm_height,above_ground,crown_diameter` with ids
/// numbered from 1 in list order; x/y are world pixel-center coordinates.
pub fn write_treetops_csv(path: &Path, tops: &[TreetopCandidate], grid: &Grid) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "id,row,col,x,y,dsm_height,above_ground,crown_diameter")?;
    for (i, t) in tops.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            t.row,
            t.col,
            grid.world_x(t.col),
            grid.world_y(t.row),
            t.dsm_height,
            t.above_ground,
            t.crown_diameter
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_treetops_csv(path: &Path) -> Result<Vec<TreetopCandidate>> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {}", path.display(), e)))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 0 && trimmed.starts_with("id,")) {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                path,
                format!(
                    "line {}: expected 8 fields, found {}",
                    lineno + 1,
                    fields.len()
                ),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::parse(path, format!("line {}: invalid number '{}'", lineno + 1, s))
            })
        };
        out.push(TreetopCandidate {
            row: parse(fields[1])? as usize,
            col: parse(fields[2])? as usize,
            dsm_height: parse(fields[5])?,
            above_ground: parse(fields[6])?,
            crown_diameter: parse(fields[7])?,
        });
    }
    Ok(out)
}

/// One row of the comparative metrics table.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub detector: String,
    pub np: usize,
    pub da: f64,
    pub e_com: f64,
    pub e_om: f64,
    pub ca: f64,
    pub p: f64,
    pub f: f64,
}

impl MetricsRow {
    pub fn from_report(detector: impl Into<String>, report: &MatchReport) -> MetricsRow {
        MetricsRow {
            detector: detector.into(),
            np: report.n_tp + report.n_fp,
            da: report.da,
            e_com: report.e_com,
            e_om: report.e_om,
            ca: report.ca,
            p: report.p,
            f: report.f_score,
        }
    }
}

/// Writes `detector,Np,DA,e_com,e_om,CA,P,F`.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "detector,Np,DA,e_com,e_om,CA,P,F")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            r.detector, r.np, r.da, r.e_com, r.e_om, r.ca, r.p, r.f
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Candidate counts after each pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageCounts {
    pub initial: usize,
    pub height_check: usize,
    pub nms: usize,
    pub postprocess: usize,
}

impl StageCounts {
    /// Counts never grow after the initial stage.
    pub fn is_monotone(&self) -> bool {
        self.initial >= self.height_check
            && self.height_check >= self.nms
            && self.nms >= self.postprocess
    }
}

pub fn write_stage_counts(path: &Path, counts: &StageCounts) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "initial,height_check,nms,post_processing")?;
    writeln!(
        w,
        "{},{},{},{}",
        counts.initial, counts.height_check, counts.nms, counts.postprocess
    )?;
    w.flush()?;
    Ok(())
}
