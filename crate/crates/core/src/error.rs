//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by corpus generation, training, and the attack pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or inconsistent experiment setup.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Tensor or model shape mismatch.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Numeric failure (divergence, non-finite values).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed or inconsistent data set.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration/data problems,
    /// 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
