use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a physical constraint (e.g. nonpositive permeability).
    #[error("data error: {0}")]
    Data(String),

    /// Input file has the wrong shape or encoding.
    #[error("format error: {0}")]
    Format(String),

    /// A linear solve or factorization failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Interval pipeline invoked out of order.
    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
