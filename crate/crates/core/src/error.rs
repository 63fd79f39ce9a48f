//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration: missing band roles, invalid parameter values,
    /// missing input files. Maps to exit code 1.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad runtime input: out-of-range pixel, empty raster, violated
    /// precondition. Maps to exit code 1.
    #[error("input error: {0}")]
    Input(String),

    /// No terrain cell found near a query pixel even after widening the
    /// search window, and no fallback height mode was configured.
    #[error("no terrain found near pixel ({row}, {col})")]
    NoTerrain { row: usize, col: usize },

    /// A file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant was violated; indicates a bug, not a data
    /// condition. Maps to exit code 2.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 1 for input/configuration problems,
    /// 2 for internal errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) => 2,
            _ => 1,
        }
    }
}
