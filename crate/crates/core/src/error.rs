use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dimension overflow: {0} x {1}")]
    DimensionOverflow(usize, usize),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid game data: {0}")]
    InvalidGame(String),

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("index clash: {0}")]
    IndexClash(String),

    #[error("unsupported hierarchy level {0} (supported: 1..=3)")]
    UnsupportedLevel(usize),

    #[error("functional term {0} has no moment class in this instance")]
    MissingMoment(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("solver did not produce a certifiable bound: {0}")]
    Uncertified(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("protocol aborted: {0}")]
    ProtocolAbort(String),

    #[error("unknown attack `{name}` (available: {available})")]
    UnknownAttack { name: String, available: String },

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
