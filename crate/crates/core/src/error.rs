use thiserror::Error;

#[derive(Debug, Error)]
pub enum CopulaError {
    #[error("argument ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },

    #[error("invalid descriptor: {0}")]
    Invalid(String),

    #[error("grid resolution mismatch ({left} vs {right}); re-grid both operands to a common n")]
    ResolutionMismatch { left: usize, right: usize },

    #[error("resolution exhausted: depth {depth} needs 2^{depth} to divide the grid size {n}")]
    ResolutionExhausted { depth: usize, n: usize },

    #[error("copula is not unit norm (norm^2 = {norm_sq}, tolerance {eps}); shuffle approximation needs norm 1")]
    NotUnitNorm { norm_sq: f64, eps: f64 },

    #[error("doubly stochastic normalization failed: {0}")]
    Normalization(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CopulaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CopulaError::Invalid(msg.into()))
}
