use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unmapped label {label:?} at row {row}")]
    UnmappedLabel { label: String, row: usize },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("only one class present in {0}")]
    SingleClass(String),

    #[error("duplicate record for doc {doc_id:?} under encoder {encoder_id:?}")]
    DuplicateRecord { doc_id: String, encoder_id: String },

    #[error("non-finite entry in record for doc {doc_id:?} under encoder {encoder_id:?}")]
    NonFinite { doc_id: String, encoder_id: String },

    #[error("missing records for {} (doc_id, encoder_id) pairs: {}", .0.len(), format_pairs(.0))]
    MissingRecords(Vec<(String, String)>),

    #[error("records of doc {0:?} disagree on label")]
    LabelDisagreement(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage {stage:?} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(d, e)| format!("({d}, {e})")).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
