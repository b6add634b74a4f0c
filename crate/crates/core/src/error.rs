use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("correlation {0} outside the open interval (-1, 1)")]
    InvalidCorrelation(f64),
    #[error("correlation {rho} not allowed here: {reason}")]
    CorrelationNotAllowed { rho: f64, reason: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid simplex vector: {0}")]
    InvalidSimplex(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("enumeration budget exceeded: {size} states > {budget}")]
    BudgetExceeded { size: u128, budget: u128 },
    #[error("ballot entry {value} at position {position} outside 1..={m}")]
    BallotOutOfRange { position: usize, value: usize, m: usize },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
