use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("unsupported exponent p = {0}; expected p > 1 or p = inf")]
    UnsupportedExponent(f64),

    #[error("not a valid channel: {0}")]
    InvalidChannel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource guard: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
