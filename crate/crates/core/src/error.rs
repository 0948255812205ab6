use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}; only d = 1, 2, 3 are implemented")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("radius {0} outside (0, 1/2)")]
    InvalidRadius(f64),

    #[error("radius interval [{a}, {b}] must satisfy 0 < a < b < 1/2")]
    InvalidInterval { a: f64, b: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("point set must contain at least one point")]
    EmptyPointSet,

    #[error("{points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },

    #[error("signed weights violate the non-negativity hypothesis")]
    SignedWeights,

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("density is not real-valued (coefficients are not Hermitian)")]
    NonRealDensity,

    #[error("frequency budget exceeded: {needed} frequencies needed, budget {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("need at least {needed} points for a fit, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("value #{index} = {value} is not positive")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
