use std::path::PathBuf;

use slsblend_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot load {path}: {msg}")]
    Load { path: PathBuf, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 1 input errors, 2 infeasible synthesis, 3 solver failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Infeasible { .. }) => 2,
            CliError::Core(CoreError::MaxIter { .. })
            | CliError::Core(CoreError::Numerical(_))
            | CliError::Core(CoreError::Unvalidated(_)) => 3,
            _ => 1,
        }
    }
}
