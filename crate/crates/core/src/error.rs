use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("design matrix is identically zero; no PL certificate exists")]
    NoPlCertificate,

    #[error("objective has no PL certificate")]
    MissingPlCertificate,

    #[error("PL estimate undefined: no probe with positive suboptimality")]
    EstimationUndefined,

    #[error("all {0} seeds diverged")]
    AllSeedsDiverged(usize),

    #[error("seed list must be nonempty and pairwise distinct")]
    InvalidSeeds,

    #[error("need at least {needed} points in window, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("nonpositive value {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("trace for seed {seed} has fewer than 2 checkpoints in the tail window")]
    EmptyTail { seed: u64 },

    #[error("traces have mismatched checkpoint grids")]
    CheckpointMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
