use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("incompatible data: {0}")]
    IncompatibleData(String),

    #[error("ill-defined degree: {0}")]
    IllDefinedDegree(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("no progress: step underflow after {iterations} iterations (residual {residual:.3e})")]
    NoProgress { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
