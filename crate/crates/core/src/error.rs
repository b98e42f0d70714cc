use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum DickeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parity violation: element ({row}, {col}) = {value:e} couples the two parity blocks")]
    ParityViolation { row: usize, col: usize, value: f64 },

    #[error("eigensolver failed in {block} block: {reason}")]
    Eigensolver { block: String, reason: String },

    #[error("state {index} is not converged (tail weight {tail_weight:?})")]
    Unconverged { index: usize, tail_weight: Option<f64> },

    #[error("energy {energy} lies within the separatrix window of the barrier at {barrier}")]
    NearSeparatrix { energy: f64, barrier: f64 },

    #[error("energy {energy} is not classically allowed (band minimum {minimum})")]
    Forbidden { energy: f64, minimum: f64 },

    #[error("not a minimum: {0}")]
    NotAMinimum(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DickeError>;
