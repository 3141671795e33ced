//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Covariance is not positive definite even after the jitter retry.
    #[error("degenerate covariance")]
    DegenerateCovariance,

    /// A parameter violates its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Training produced a non-finite loss.
    #[error("training diverged for member {member} at epoch {epoch}")]
    TrainingDiverged { member: usize, epoch: usize },

    /// A CSV cell could not be parsed or validated.
    #[error("bad value in {path} at row {row}, column {column}: {reason}")]
    CsvValue {
        path: String,
        row: usize,
        column: String,
        reason: String,
    },

    /// A CSV file is structurally unusable (missing column, bad header).
    #[error("malformed CSV {path}: {reason}")]
    CsvFormat { path: String, reason: String },

    /// Candidate pool has fewer unacquired points than requested.
    #[error("pool exhausted: requested {requested}, only {available} available")]
    PoolExhausted { requested: usize, available: usize },

    /// A pool candidate was acquired twice.
    #[error("pool index {0} already acquired")]
    AlreadyAcquired(usize),

    /// Statistical test input with no usable variance.
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
