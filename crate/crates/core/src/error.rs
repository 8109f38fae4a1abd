//! Crate-wide error type. Variants map onto the failure classes the CLI
//! reports: bad inputs, malformed files, and numerical breakdowns.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnimcError {
    /// Input data violates a structural requirement (coverage, label range, binary mask).
    #[error("validation error: {0}")]
    Validation(String),

    /// Matrix or vector shapes do not conform.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scalar parameter is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear solve failed even after the ridge retry.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A computation produced a nonfinite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file exists but does not parse as the expected format.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, AnimcError>;
