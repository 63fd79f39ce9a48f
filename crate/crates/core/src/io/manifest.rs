//! Plain-text band manifest: band files in order plus role assignments.
//!
//! One band file path per line, in band order; role assignments as
//! `RED=<0-based band index>` / `NIR=<index>` lines; `#` starts a comment.
//! Paths are resolved relative to the manifest's directory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::raster::{BandRole, MultibandRaster};

use super::ascii_grid::read_grid;

pub fn read_band_manifest(path: &Path) -> Result<MultibandRaster> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {}", path.display(), e)))?;
    let reader = BufReader::new(file);
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut band_paths: Vec<PathBuf> = Vec::new();
    let mut roles: Vec<(BandRole, usize)> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.split('#').next().unwrap_or("").trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some((key, value)) = trimmed.split_once('=') {
            if let Some(role) = BandRole::parse(key.trim()) {
                let index: usize = value.trim().parse().map_err(|_| {
                    Error::parse(
                        path,
                        format!("line {}: invalid band index '{}'", lineno + 1, value.trim()),
                    )
                })?;
                roles.push((role, index));
                continue;
            }
            return Err(Error::parse(
                path,
                format!("line {}: unknown role '{}'", lineno + 1, key.trim()),
            ));
        }
        band_paths.push(base.join(trimmed));
    }

    if band_paths.is_empty() {
        return Err(Error::parse(path, "manifest lists no band files"));
    }

    let mut bands = band_paths.iter().map(|p| read_grid(p));
    let mut raster = MultibandRaster::new(bands.next().unwrap()?);
    for band in bands {
        raster.push_band(band?)?;
    }
    for (role, index) in roles {
        raster.assign_role(role, index)?;
    }
    Ok(raster)
}

/// Writes a manifest referencing `band_files` (paths as given, typically
/// relative) with the given role assignments.
pub fn write_band_manifest(
    path: &Path,
    band_files: &[String],
    roles: &[(BandRole, usize)],
) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for f in band_files {
        writeln!(w, "{}", f)?;
    }
    for (role, index) in roles {
        writeln!(w, "{}={}", role.name(), index)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_grid;
    use crate::raster::Grid;

    #[test]
    fn manifest_round_trip() {
        let dir = std::env::temp_dir().join("crownseg-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..3 {
            let g = Grid::filled(3, 2, 1.0, i as f64);
            write_grid(&dir.join(format!("b{}.asc", i)), &g).unwrap();
        }
        let manifest = dir.join("bands.txt");
        write_band_manifest(
            &manifest,
            &["b0.asc".into(), "b1.asc".into(), "b2.asc".into()],
            &[(BandRole::Red, 0), (BandRole::Nir, 2)],
        )
        .unwrap();

        let raster = read_band_manifest(&manifest).unwrap();
        assert_eq!(raster.band_count(), 3);
        assert_eq!(raster.role_index(BandRole::Red), Some(0));
        assert_eq!(raster.role_index(BandRole::Nir), Some(2));
        assert_eq!(raster.band(1).get(0, 0), 1.0);
    }

    #[test]
    fn empty_manifest_is_parse_error() {
        let dir = std::env::temp_dir().join("crownseg-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let manifest = dir.join("empty.txt");
        std::fs::write(&manifest, "# only a comment\n").unwrap();
        assert!(matches!(
            read_band_manifest(&manifest),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn role_index_out_of_range_is_config_error() {
        let dir = std::env::temp_dir().join("crownseg-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let g = Grid::filled(2, 2, 1.0, 0.0);
        write_grid(&dir.join("only.asc"), &g).unwrap();
        let manifest = dir.join("bad_role.txt");
        std::fs::write(&manifest, "only.asc\nRED=5\n").unwrap();
        assert!(matches!(
            read_band_manifest(&manifest),
            Err(Error::Config(_))
        ));
    }
}
