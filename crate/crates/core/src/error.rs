use thiserror::Error;

use crate::tensor::TensorError;

/// Errors raised by the state, perspective and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("degenerate measurement: every outcome has probability below 1e-12")]
    DegenerateMeasurement,
    #[error("configuration error: {0}")]
    Configuration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
