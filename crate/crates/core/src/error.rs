use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{0}`")]
    DuplicateId(String),

    #[error("invalid document `{id}`: {message}")]
    InvalidDocument { id: String, message: String },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("empty text cannot be tokenized")]
    EmptyText,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence of {len} tokens exceeds the context limit of {limit} tokens")]
    ContextOverflow { len: usize, limit: usize },

    #[error("encoding {len} tokens needs {needed} bytes, over the {budget} byte memory budget")]
    MemoryBudget {
        len: usize,
        needed: usize,
        budget: usize,
    },

    #[error("non-finite value in {stage} at position {position}")]
    NonFinite { stage: &'static str, position: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("{0}")]
    Degenerate(String),

    #[error("no embedding stored for document `{0}`")]
    MissingEmbedding(String),

    #[error("document id mismatch at position {position}: prediction `{predicted}` vs gold `{gold}`")]
    IdMismatch {
        position: usize,
        predicted: String,
        gold: String,
    },

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("timer resolution {resolution_ns} ns is coarser than 1% of the measured {measured_ns} ns; increase the sequence length or repetitions")]
    TimerResolution { resolution_ns: u128, measured_ns: u128 },

    #[error("malformed binary file: {0}")]
    Format(String),

    #[error("cannot claim reproduction: {0}")]
    Reproduction(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
