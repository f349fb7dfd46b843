use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PolyCfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PolyCfError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("training file {0} contains no interactions")]
    EmptyTrain(PathBuf),

    #[error("id {id} exceeds 10x the line count ({lines}); ids must be dense indices")]
    SparseIds { id: usize, lines: usize },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "truncated SVD did not converge after {iterations} iterations (residuals {residuals:?})"
    )]
    SvdNotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}; theta = {theta:?}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        theta: Vec<Vec<f64>>,
    },

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("dense diagnostic limited to n <= {limit}, got {n}")]
    ScaleGuard { n: usize, limit: usize },

    #[error("SVD cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PolyCfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PolyCfError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        PolyCfError::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(PolyCfError::DimensionMismatch { expected, got })
    }
}
