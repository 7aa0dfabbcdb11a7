use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is outside its valid range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates the model's preconditions.
    #[error("invalid data: {0}")]
    Data(String),

    /// A categorical proposal had no positive weight.
    #[error("degenerate proposal weights: {0}")]
    DegenerateWeights(String),

    /// Every particle carries zero weight.
    #[error("degenerate particle ensemble: all weights are zero")]
    DegenerateEnsemble,

    /// Rejection sampling gave up.
    #[error("could not place objects after {attempts} attempts")]
    Overcrowded { attempts: usize },

    #[error("{path}: line {line}: {msg}")]
    Schema {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 2 for configuration
    /// problems (including layouts that cannot be placed), 3 for bad or unreadable data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Overcrowded { .. } => 2,
            _ => 3,
        }
    }
}
