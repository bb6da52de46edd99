use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file has no header or no data rows")]
    EmptyFile,
    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),
    #[error("row {row}: label `{value}` is not 0/1/true/false")]
    UnparseableLabel { row: usize, value: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("cannot split a dataset with {0} row(s)")]
    DegenerateSplit(usize),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("score {value} at row {row} is outside [0, 1]")]
    ScoreOutOfRange { row: usize, value: f64 },
    #[error("dimension mismatch: model expects {expected} columns, data has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty data")]
    EmptyData,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("interval [{start}, {end}] is invalid for a group with {len} rows")]
    InvalidInterval {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("no group has members with nonzero variance")]
    NoValidGroups,
    #[error("metric `{0}` is undefined when only one class is present")]
    SingleClassMetricUndefined(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
