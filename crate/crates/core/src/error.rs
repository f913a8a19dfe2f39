use std::path::PathBuf;

use crate::models::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
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

    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("column mapping binds `{0}` to more than one logical column")]
    DuplicateMapping(String),

    #[error("dataset is empty after cleaning")]
    EmptyAfterCleaning,

    #[error("feature `{0}` is not present in the dataset")]
    FeatureAbsent(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("split leaves an empty side (train={train}, test={test})")]
    EmptySplit { train: usize, test: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("training data is empty")]
    EmptyTraining,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid k range: {0}")]
    KRange(String),

    #[error("serial {serial} is missing a result for {kind}")]
    IncompleteSerial { serial: u8, kind: ModelKind },

    #[error("run (serial {serial}, {kind}) failed: {source}")]
    RunFailed {
        serial: u8,
        kind: ModelKind,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep is incomplete: {0} of the expected runs are missing")]
    IncompleteSweep(usize),

    #[error("cancelled")]
    Cancelled,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
