use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix dimensions do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The projected sample has zero variance, so standardized cumulants
    /// are undefined. Raised instead of returning 0 so that a silent
    /// degenerate direction cannot win a maximization.
    #[error("degenerate sample: projected variance is zero")]
    DegenerateSample,

    /// A numerical procedure produced a non-finite intermediate.
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
