use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An order-statistic specification or index tuple is malformed.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// A distribution parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Exhaustive enumeration was requested beyond the configured budget.
    #[error("enumeration budget exceeded: length {requested} > {limit}")]
    BudgetExceeded { requested: usize, limit: usize },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    },

    /// The integral defining a conditional mean diverges for this parent.
    #[error("infinite mean: {0}")]
    InfiniteMean(String),

    /// A regression curve cannot come from any parent distribution.
    #[error("invalid regression input: {0}")]
    InvalidRegression(String),

    #[error("empty bin {bin}: increase the replicate count or reduce bins")]
    EmptyBin { bin: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
