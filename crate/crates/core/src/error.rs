use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {name} = {value} must lie strictly inside (0, 1)")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("invalid trial specification: {0}")]
    InvalidTrial(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid utility: {0}")]
    InvalidUtility(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("non-finite value in sampler: {0}")]
    NonFinite(String),

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("output failed: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
