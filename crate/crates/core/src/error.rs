use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BompError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("block index {index} out of range 1..={num_blocks}")]
    BlockIndexOutOfRange { index: usize, num_blocks: usize },

    #[error("block index {0} listed more than once")]
    DuplicateBlockIndex(usize),

    #[error("unsupported mixed norm order: {0}")]
    UnsupportedNorm(String),

    #[error("subdictionary is rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration cost {cost} exceeds budget {budget}")]
    BudgetExceeded { cost: u128, budget: u128 },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("degenerate probe: {0}")]
    DegenerateProbe(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for BompError {
    fn from(err: std::io::Error) -> Self {
        BompError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for BompError {
    fn from(err: serde_json::Error) -> Self {
        BompError::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BompError>;
