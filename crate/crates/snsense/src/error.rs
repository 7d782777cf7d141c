//! Crate-wide error type and the process exit codes used by the CLI.

use thiserror::Error;

/// Unified error type for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, precondition violation or mismatched inputs.
    #[error("validation error: {0}")]
    Validation(String),

    /// Shape disagreement between tensors/matrices.
    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch {
        expected: String,
        got: String,
        context: String,
    },

    /// A capture or pseudo-inverse refers to a different sensing matrix.
    #[error("sensing matrix digest mismatch ({context})")]
    MatrixMismatch { context: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing file or directory: {path}")]
    MissingFile { path: String },

    #[error("malformed file: {0}")]
    Format(String),

    /// Singular system encountered while factorizing/inverting.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Rank-deficient least-squares system inside OMP.
    #[error("rank-deficient selection at iteration {iteration}")]
    RankDeficient { iteration: usize },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl Error {
    /// Exit code contract: 0 success, 1 validation, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::ShapeMismatch { .. } | Error::MatrixMismatch { .. } => 1,
            Error::Io(_) | Error::MissingFile { .. } | Error::Format(_) => 2,
            Error::Singular(_) | Error::RankDeficient { .. } | Error::Divergence { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
