//! Error types shared across the crate.

use thiserror::Error;

/// Errors from dataset construction, validation and (de)serialization.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("validation error on line {line}: {message}")]
    ValidationAt { line: usize, message: String },

    #[error("cell index ({row},{col}) out of range for {rows}×{cols} table")]
    IndexOutOfRange { row: usize, col: usize, rows: usize, cols: usize },
}

/// Errors from dataset generation.
#[derive(Debug, Error)]
pub enum GenError {
    #[error("schema pool exhausted for field `{0}`")]
    PoolExhausted(String),

    #[error("no valid query configuration after {0} retries")]
    RetriesExhausted(usize),

    #[error("invalid generation config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Data(#[from] DataError),
}

/// Contract violations on the model-facing APIs.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("query must contain at least one token")]
    EmptyQuery,

    #[error("execution step {0} out of range (model has {1} steps)")]
    StepOutOfRange(usize, usize),

    #[error("field labels required when lambda > 0")]
    MissingFieldLabels,

    #[error("field labels cover {got} samples, expected {expected}")]
    LabelCountMismatch { got: usize, expected: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
