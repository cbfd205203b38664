use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate function")]
    DegenerateFunction,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot parse rational {0:?}")]
    ParseRational(String),
    #[error("invalid omega: {0}")]
    InvalidOmega(String),
    #[error("not an omega-family state")]
    NotOmegaFamily,
    #[error("omega set too large; supply support_cap (projected {projected}, limit {limit})")]
    OmegaSetTooLarge { projected: String, limit: u64 },
    #[error("inconclusive: search node budget {budget} exhausted")]
    Inconclusive { budget: u64 },
    #[error("schedule/state mismatch: {0}")]
    ScheduleMismatch(String),
    #[error("invalid RPE schedule: {0}")]
    InvalidRpeSchedule(String),
    #[error("matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("covariance violates the uncertainty relation (min eigenvalue {0:e})")]
    Uncertainty(f64),
    #[error("weight vector is not normalized (norm {0})")]
    NotUnitWeight(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
