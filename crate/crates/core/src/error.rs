use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: lower bound {lo} must be below upper bound {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),

    #[error("unsupported spline degree {0}")]
    UnsupportedDegree(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid input dimension {0}; at least 2 features are required")]
    InvalidDimension(usize),

    #[error("invalid training times: shortest {shortest}, longest {longest}, count {count}")]
    InvalidTimes {
        shortest: f64,
        longest: f64,
        count: u64,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("input contains a single class; both labels 0 and 1 are required")]
    SingleClass,

    #[error("insufficient data: need at least {needed} rows, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("class too small: split '{split}' would receive no rows of class {class}")]
    ClassTooSmall { split: String, class: u8 },

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("column '{0}' not found")]
    MissingColumn(String),

    #[error("unparseable row at line {line}: {reason}")]
    UnparseableRow { line: u64, reason: String },

    #[error("column '{0}' has no non-missing values")]
    AllMissingColumn(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
