use thiserror::Error;

/// Errors produced by the simulator and the linearization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("channel matrix is rank deficient or ill-conditioned (min singular value {min_singular_value:.3e})")]
    Conditioning { min_singular_value: f64 },

    #[error("intermodulation image outside visible space (sin argument {0:.6})")]
    OutOfVisibleSpace(f64),

    #[error("cannot scale a zero-power signal")]
    ZeroPower,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
