use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RacaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RacaError {
    /// A value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("weight {value} at ({row}, {col}) of layer {layer} is outside [{w_min}, {w_max}]")]
    WeightOutOfRange {
        layer: usize,
        row: usize,
        col: usize,
        value: f64,
        w_min: f64,
        w_max: f64,
    },

    #[error("layer {layer}: {message}")]
    Layer { layer: usize, message: String },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("weight archive: {0}")]
    Archive(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RacaError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        RacaError::Domain(msg.into())
    }

    pub(crate) fn dimension(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        RacaError::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            RacaError::Config(_) => 1,
            RacaError::Numeric(_) => 3,
            _ => 2,
        }
    }
}
