//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by configuration checks, data ingestion, and numerics.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed, inconsistent, or missing data.
    #[error("data error: {0}")]
    Data(String),

    /// A file could not be parsed; carries the offending 1-based line number.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An optimizer needed history that is no longer (or not yet) available.
    #[error("history error: {0}")]
    History(String),

    /// The operation is out of scope for this implementation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
