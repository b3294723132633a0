use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid multi-index: {0}")]
    InvalidMultiIndex(String),

    #[error("invalid preordering: {0}")]
    InvalidPreordering(String),

    #[error("invalid point sample: {0}")]
    InvalidSample(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel is not Hermitian (max defect {0:.3e})")]
    NotHermitian(f64),

    #[error("kernel is indefinite beyond tolerance (min eigenvalue {0:.3e})")]
    Indefinite(f64),

    #[error("reference kernel has a zero entry at ({0}, {1})")]
    ZeroEntry(usize, usize),

    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("invalid operator tuple: {0}")]
    InvalidTuple(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
