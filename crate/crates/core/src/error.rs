use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vertex index {index} out of range for {num_vertices} vertices")]
    IndexOutOfRange { index: usize, num_vertices: usize },

    #[error("empty gene edge: retention fraction {beta_fraction} keeps no patches out of {num_patches}")]
    EmptyGeneEdge { beta_fraction: f64, num_patches: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("cold memory: the memory bank has no entries")]
    ColdMemory,

    #[error("undefined C-index: no comparable pairs")]
    UndefinedCIndex,

    #[error("degenerate log-rank: zero variance")]
    DegenerateLogRank,

    #[error("record {0} has neither pathology nor genomics")]
    EmptyRecord(String),

    #[error("record {0} is missing a modality and no memory bank was provided")]
    MissingBank(String),

    #[error("training record {0} is incomplete")]
    IncompleteTrainingRecord(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Validation errors are caller mistakes (bad flags or inputs); everything
    /// else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::DimensionMismatch(_)
                | Error::IncompleteTrainingRecord(_)
                | Error::EmptyRecord(_)
                | Error::CheckpointMismatch(_)
                | Error::MissingBank(_)
        )
    }
}
