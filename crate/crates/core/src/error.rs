use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Usage errors (bad dimensions, bad
/// arguments) are distinguished from run outcomes such as divergence,
/// which the harness records as a status instead of aborting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The initial momentum-weighted accumulator is exactly zero, i.e.
    /// `d_1 = 0`. On a deterministic oracle this certifies a stationary
    /// start point.
    #[error("zero gradient estimate at initialization")]
    StationaryAtInit,

    #[error("non-finite iterate detected at step {step}")]
    DivergenceDetected { step: u64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
