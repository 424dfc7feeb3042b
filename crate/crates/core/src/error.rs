use thiserror::Error;

/// Errors raised by the power-prior routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerPriorError {
    #[error("design matrix is singular: X'X is not positive definite")]
    SingularDesign,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid summary statistics: {0}")]
    InvalidSummary(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("insufficient historical data: n0 = {n0} must exceed p = {p}")]
    InsufficientHistoricalData { n0: usize, p: usize },
    #[error("singular system: delta = 0 with k = 0 leaves the historical location undefined")]
    SingularSystem,
    #[error("delta = {delta} lies outside the feasible set")]
    OutsideFeasibleSet { delta: f64 },
    #[error("scale parameter is not positive ({0})")]
    NonpositiveScale(f64),
    #[error("posterior is improper at delta = {delta}: {reason}")]
    ImproperPosterior { delta: f64, reason: String },
    #[error("posterior moment undefined: shape {shape} must exceed 1")]
    MomentUndefined { shape: f64 },
    #[error("no delta in the search domain yields a proper objective")]
    EmptyDomain,
    #[error("value {0} lies outside the unit interval")]
    DomainError(f64),
    #[error("quadrature oracle supports p = 1 only (got p = {0})")]
    UnsupportedDimension(usize),
    #[error("integral diverges")]
    Divergent,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PowerPriorError>;

impl From<std::io::Error> for PowerPriorError {
    fn from(e: std::io::Error) -> Self {
        PowerPriorError::Io(e.to_string())
    }
}

impl From<csv::Error> for PowerPriorError {
    fn from(e: csv::Error) -> Self {
        PowerPriorError::Io(e.to_string())
    }
}
