use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (shape, sign, symmetry...).
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A matrix that must be positive definite or invertible was not.
    #[error("singular system: {0}")]
    Singular(String),

    /// Floating-point breakdown inside an update (non-invertible correction,
    /// non-finite intermediate, residual check failure).
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} (row {row}, column {col}): {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("config error in {path}: {msg}")]
    Config { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        got: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::DimensionMismatch { .. } | Error::Config { .. } => 1,
            Error::Parse { .. } => 1,
            Error::Singular(_) | Error::NumericalBreakdown(_) => 2,
            Error::Io { .. } => 3,
        }
    }
}
