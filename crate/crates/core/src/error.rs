use thiserror::Error;

use crate::problems::DataError;
use crate::regularizers::RegularizerError;
use crate::topology::TopologyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("iteration budget too small: T + 1 = {budget} < {required}")]
    BudgetTooSmall { budget: f64, required: f64 },
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
