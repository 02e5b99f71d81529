use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("joint dimension {dim} exceeds the maximum {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("not hermitian (max |M - M†| = {0:e})")]
    NotHermitian(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    BadTrace(f64),

    #[error("expectation value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate isometry parameters: {0}")]
    DegenerateParameters(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("out of scope: {0}")]
    Scope(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("invalid state specification: {0}")]
    Spec(String),

    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
