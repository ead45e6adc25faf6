use thiserror::Error;

/// Errors raised by the regression, interval and coverage routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MataError {
    #[error("design matrix is rank deficient (min/max |R_jj| = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("response vector y is required for this operation")]
    MissingResponse,

    #[error("restriction matrix H_K (X'X)^-1 H_K' is singular for subset {mask:#x}")]
    SingularRestriction { mask: u64 },

    #[error("operation requires a non-empty subset")]
    EmptySubset,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("p - q = {nuisance} exceeds the enumeration cap of {cap}")]
    TooManyNuisance { nuisance: usize, cap: usize },

    #[error("degenerate fit: residual sum of squares is zero")]
    DegenerateFit,

    #[error("invalid weight kernel: {0}")]
    InvalidKernel(String),

    #[error("root bracket not found after {0} doublings")]
    BracketFailure(usize),

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("quadrature did not converge: node doubling changed result by {change:e}")]
    QuadratureError { change: f64 },

    #[error("coverage event mismatch on replicate {replicate}")]
    EventMismatch { replicate: u64 },

    #[error("numerical identity violated: {0}")]
    Inconsistent(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, MataError>;
