//! Crate-wide error type.

use thiserror::Error;

/// Errors shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A level or round index outside the valid range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// An exhaustive computation was requested beyond the configured size
    /// limit; the message names the Monte Carlo / search fallback.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Mismatched shapes (tree depths, vector dimensions, row lengths).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An input value outside the operation's documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numeric failure (non-convergence, NaN, divergent integral).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The model kind does not support the requested statistic.
    #[error("capability error: {0}")]
    Capability(String),

    /// Configuration or serialization problem.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
