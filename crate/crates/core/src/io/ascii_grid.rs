//! ESRI-style ASCII grid reader/writer.
//!
//! Layout: header lines `ncols`, `nrows`, `xllcorner`, `yllcorner`,
//! `cellsize`, `NODATA_value`, then `nrows` lines of whitespace-separated
//! decimals, top row first. Header keys are matched case-insensitively on
//! read; `NODATA_value` is optional and defaults to -9999.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Grid, DEFAULT_NODATA};

pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "ncols {}", grid.width())?;
    writeln!(w, "nrows {}", grid.height())?;
    writeln!(w, "xllcorner {}", grid.origin().0)?;
    writeln!(w, "yllcorner {}", grid.origin().1)?;
    writeln!(w, "cellsize {}", grid.cell_size())?;
    writeln!(w, "NODATA_value {}", grid.nodata())?;
    for row in 0..grid.height() {
        let mut line = String::new();
        for col in 0..grid.width() {
            if col > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{}", grid.get(row, col)));
        }
        writeln!(w, "{}", line)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {}", path.display(), e)))?;
    let reader = BufReader::new(file);

    let mut ncols: Option<usize> = None;
    let mut nrows: Option<usize> = None;
    let mut xll: f64 = 0.0;
    let mut yll: f64 = 0.0;
    let mut cellsize: Option<f64> = None;
    let mut nodata: f64 = DEFAULT_NODATA;
    let mut values: Vec<f64> = Vec::new();
    let mut in_header = true;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if in_header {
            let mut parts = trimmed.split_whitespace();
            let key = parts.next().unwrap_or("");
            if key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let value = parts.next().ok_or_else(|| {
                    Error::parse(
                        path,
                        format!("line {}: header '{}' has no value", lineno + 1, key),
                    )
                })?;
                match key.to_ascii_lowercase().as_str() {
                    "ncols" => ncols = Some(parse_num(path, lineno, value)? as usize),
                    "nrows" => nrows = Some(parse_num(path, lineno, value)? as usize),
                    "xllcorner" => xll = parse_num(path, lineno, value)?,
                    "yllcorner" => yll = parse_num(path, lineno, value)?,
                    "cellsize" => cellsize = Some(parse_num(path, lineno, value)?),
                    "nodata_value" => nodata = parse_num(path, lineno, value)?,
                    other => {
                        return Err(Error::parse(
                            path,
                            format!("line {}: unknown header key '{}'", lineno + 1, other),
                        ))
                    }
                }
                continue;
            }
            in_header = false;
        }
        for tok in trimmed.split_whitespace() {
            values.push(parse_num(path, lineno, tok)?);
        }
    }

    let ncols = ncols.ok_or_else(|| Error::parse(path, "missing ncols header"))?;
    let nrows = nrows.ok_or_else(|| Error::parse(path, "missing nrows header"))?;
    let cellsize = cellsize.ok_or_else(|| Error::parse(path, "missing cellsize header"))?;
    if values.len() != ncols * nrows {
        return Err(Error::parse(
            path,
            format!(
                "expected {} values for {}x{} grid, found {}",
                ncols * nrows,
                ncols,
                nrows,
                values.len()
            ),
        ));
    }
    Grid::from_values(ncols, nrows, cellsize, (xll, yll), nodata, values)
}

fn parse_num(path: &Path, lineno: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| {
        Error::parse(
            path,
            format!("line {}: invalid number '{}'", lineno + 1, tok),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("crownseg-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trip_preserves_values_and_nodata() {
        let mut g = Grid::filled(5, 4, 0.3, 0.0);
        g.set_origin((123.456, -7.25));
        g.set(0, 0, 1.5);
        g.set(1, 2, -2.75e-3);
        g.set(3, 4, 1e18);
        g.set(2, 2, g.nodata());
        let path = tmpfile("roundtrip.asc");
        write_grid(&path, &g).unwrap();
        let back = read_grid(&path).unwrap();
        assert!(back.same_geometry(&g));
        assert_eq!(back.nodata(), g.nodata());
        assert_eq!(back.values(), g.values());
        assert!(back.is_nodata(2, 2));
    }

    #[test]
    fn missing_header_is_parse_error() {
        let path = tmpfile("bad_header.asc");
        std::fs::write(&path, "ncols 2\nnrows 2\n1 2\n3 4\n").unwrap();
        match read_grid(&path) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn wrong_cell_count_is_parse_error() {
        let path = tmpfile("bad_count.asc");
        std::fs::write(
            &path,
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n",
        )
        .unwrap();
        assert!(matches!(read_grid(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_file_is_config_error() {
        let path = tmpfile("does_not_exist.asc");
        let _ = std::fs::remove_file(&path);
        assert!(matches!(read_grid(&path), Err(Error::Config(_))));
    }

    proptest! {
        // Write/read preserves arbitrary finite values bit-exactly.
        #[test]
        fn round_trip_bit_exact(values in proptest::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
            12,
        )) {
            let g = Grid::from_values(4, 3, 0.5, (10.0, 20.0), DEFAULT_NODATA, values).unwrap();
            let path = tmpfile(&format!("prop_{:?}.asc", std::thread::current().id()));
            write_grid(&path, &g).unwrap();
            let back = read_grid(&path).unwrap();
            for (a, b) in g.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
