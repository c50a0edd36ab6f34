use thiserror::Error;

/// Errors raised by the simulation, learning, and auditing routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arm {arm} out of range for a {k}-arm instance")]
    ArmOutOfRange { arm: usize, k: usize },

    #[error("context mismatch: {0}")]
    ContextMismatch(String),

    #[error("non-consecutive round index: expected {expected}, got {got}")]
    NonConsecutiveRound { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty candidate set")]
    EmptyCandidateSet,

    #[error("arm {0} is not in the active set")]
    ArmNotActive(usize),

    #[error("dimension {d} outside supported range {min}..={max}")]
    DimensionOutOfRange { d: usize, min: usize, max: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
