use std::path::PathBuf;

use thiserror::Error;

use crate::instance::Violation;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix entries must be finite (first bad entry at index {index})")]
    NonFinite { index: usize },

    #[error("matrix has {rows}x{cols} shape but {len} entries")]
    BadShape {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("not positive definite: pivot {pivot} at step {step}")]
    NotPositiveDefinite { step: usize, pivot: f64 },

    #[error("singular linear system (zero pivot at column {column})")]
    Singular { column: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid instance: {}", format_violations(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("{}: file not found", .path.display())]
    FileNotFound { path: PathBuf },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: bad manifest field `{field}`: {message}", .path.display())]
    Manifest {
        path: PathBuf,
        field: String,
        message: String,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { op, expected, got })
    }
}

pub(crate) fn io_error(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
    let path = path.into();
    if source.kind() == std::io::ErrorKind::NotFound {
        Error::FileNotFound { path }
    } else {
        Error::Io { path, source }
    }
}
