//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A loss or gradient was requested over an empty batch or dataset.
    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Precondition violation on an otherwise well-typed call.
    #[error("domain error: {0}")]
    Domain(String),

    /// Config-file or override rejected; names the offending key and line.
    #[error("config error (line {line}, key `{key}`): {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    /// Malformed external file contents (magic numbers, counts).
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Training produced a non-finite loss or parameter; the run is aborted.
    #[error("non-finite value in run `{run_id}` (seed {seed}) at epoch {epoch}, step {step}")]
    NonFinite {
        run_id: String,
        seed: u64,
        epoch: usize,
        step: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
