use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Gram-Schmidt pivot collapsed below the degeneracy threshold.
    #[error("degenerate directions: row {row} has residual norm {norm:e} after projection")]
    Degenerate { row: usize, norm: f64 },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("non-finite gradient in parameter group `{group}` ({count} entries)")]
    NonFiniteGradient { group: String, count: usize },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema_json(err: &serde_json::Error) -> Self {
        // serde_json already reports line and column.
        Error::Schema(err.to_string())
    }
}
