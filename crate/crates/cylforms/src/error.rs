use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported metric shape: {0}")]
    UnsupportedShape(String),
    #[error("insufficient jet depth: order {needed} requested, {available} available")]
    InsufficientJetDepth { needed: i32, available: i32 },
    #[error("form degree {0} is not valid here")]
    InvalidDegree(i32),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("spectral check failed: {0}")]
    SpectralCheck(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("eigensolver did not converge: {0}")]
    NonConvergent(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
