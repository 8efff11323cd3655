use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite even after jitter")]
    NotPositiveDefinite,

    #[error("value does not match the distribution: {0}")]
    TypeMismatch(String),

    #[error("node {0} has already been realized and cannot be observed")]
    AlreadyRealized(usize),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("all particle weights are zero at step {step}")]
    Degenerate { step: usize },

    #[error("particles disagree on checkpoint placement at step {step}")]
    Misaligned { step: usize },

    #[error("model error: {0}")]
    Model(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
