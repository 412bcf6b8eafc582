use thiserror::Error;

/// Errors produced by the level-set toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("simplex weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("simplex weights sum to {sum}, expected 1")]
    BadSum { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("density {0} has no sampling rule")]
    Unsampleable(usize),
    #[error("mixture density vanishes at the query point")]
    OffSupportPoint,
    #[error("prevalence must lie in the interior of the simplex")]
    InteriorRequired,
    #[error("prevalence values are not self-consistent: {0}")]
    InconsistentRatios(String),
    #[error("invalid class pair ({0}, {1})")]
    BadPair(usize, usize),
    #[error("invalid prevalence grid: {0}")]
    BadGrid(String),
    #[error("bracket cannot be refined: {0}")]
    NotRefinable(&'static str),
    #[error("ratio matrix has no standard form: {0}")]
    NotStandardizable(String),
    #[error("ratio matrix is inconsistent: {0}")]
    Inconsistent(String),
    #[error("reconstruction regions are degenerate: {0}")]
    DegenerateRegions(&'static str),
    #[error("reconstructed density constants are not strictly positive")]
    NonPositive,
    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tol:e}")]
    QuadratureFailure { estimate: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("score difference never changes sign on the grid")]
    NoCrossing,
    #[error("interval data admit no self-consistent witness at this point")]
    InconsistentPoint,
    #[error("classifier protocol error: {0}")]
    Protocol(String),
    #[error("unsupported prevalence for this classifier: {0}")]
    UnsupportedPrevalence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
