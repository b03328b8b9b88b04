use thiserror::Error;

/// Crate-wide error type. Variants carry enough structure for callers to
/// distinguish shape bugs, constraint violations, and sizing failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("architecture invalid: {reason}")]
    BadArchitecture { reason: String },

    #[error("layer {layer}: {reason}")]
    BadLayer { layer: usize, reason: String },

    #[error("input has dimension {got}, network expects {expected}")]
    InputDim { got: usize, expected: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible networks: {0}")]
    Incompatible(String),

    #[error("grid budget {n} below the minimum {min} required for dimension {dim}")]
    GridTooCoarse { n: usize, min: usize, dim: usize },

    #[error("{stage} stage could not reach target {target:.3e} (best measured {measured:.3e} at size {size})")]
    StageBudget {
        stage: String,
        target: f64,
        measured: f64,
        size: usize,
    },

    #[error("partition coverage failure: {reason}; increase centers_per_chart")]
    Coverage { reason: String },

    #[error("margin audit failure: {0}")]
    Margin(String),

    #[error("serialization: {0}")]
    Format(String),

    #[error("unsupported format version {got} (supported: {supported})")]
    Version { got: u16, supported: u16 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
