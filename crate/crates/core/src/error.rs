use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eig:e})")]
    NotPositiveSemidefinite { min_eig: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error("invalid sample size {0}: BIC requires N >= 3")]
    InvalidSampleSize(usize),
    #[error("invalid eigenvalue bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("iterate is infeasible: {0}")]
    InfeasibleIterate(String),
    #[error("symmetric eigendecomposition failed to converge")]
    EigenFailure,
    #[error("enumeration oracle supports at most 8 variables, got {0}")]
    OracleTooLarge(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
