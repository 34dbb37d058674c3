use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain an operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// A point has no preimage under the embedding inside its input box.
    #[error("no preimage: {0}")]
    NoPreimage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid configuration or arguments supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A learner gave up with a diagnostic.
    #[error("learner aborted: {0}")]
    Aborted(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
