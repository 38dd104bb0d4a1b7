use thiserror::Error;

/// Errors raised by the identification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("lag {lag} exceeds the available input history of {history} samples")]
    LagOutOfRange { lag: usize, history: usize },

    #[error("regressor matrix is rank deficient (smallest singular value {smallest_singular_value:e})")]
    RankDeficient { smallest_singular_value: f64 },

    #[error("cost is not finite at theta = {theta}")]
    NonFiniteCost { theta: f64 },

    #[error("map value is not finite at {point:?}")]
    NonFiniteMap { point: Vec<f64> },

    #[error("every quadrature term underflowed at t = {t}, theta = {theta}")]
    QuadratureUnderflow { t: usize, theta: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("weighting matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
