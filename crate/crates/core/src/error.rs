use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("points coincide (distance below 1e-9 m)")]
    CoincidentPoints,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("estimated steering directions are rank deficient")]
    RankDeficient,

    #[error("operation requires a solved (optimal) solution, found status {0}")]
    Unsolved(String),

    #[error("solver capability missing: {0}")]
    CapabilityMissing(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot aggregate an empty record group")]
    EmptyGroup,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
