use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent domain input (grid, mask, design, data).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration document failed validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A data or raster file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("stability violation: dt = {dt} exceeds bound {max_dt}")]
    Unstable { dt: f64, max_dt: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Parse { .. } => ErrorKind::Validation,
            Error::Numeric(_) | Error::Unstable { .. } => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
