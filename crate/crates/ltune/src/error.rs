//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed parameter-space document.
    #[error("parameter space parse error at line {line}: {message}")]
    SpaceParse { line: usize, message: String },

    /// A value or argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Dataset file does not match the expected header or row layout.
    #[error("dataset format error at row {row}: {message}")]
    DatasetFormat { row: usize, message: String },

    /// Matrix shapes do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Model training produced a non-finite loss.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    /// Cholesky factorization failed even after jitter escalation.
    #[error("kernel matrix not positive definite (jitter escalated to {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    /// External benchmark command failed.
    #[error("benchmark command failed ({reason}): {detail}")]
    Benchmark { reason: String, detail: String },

    /// A metric key declared in the parse spec never appeared in the output.
    #[error("benchmark output missing metric key `{key}`")]
    MissingMetricKey { key: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
