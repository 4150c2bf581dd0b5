use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Row with a different column count, or an unreadable record.
    #[error("malformed csv at line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    /// A cell that is neither numeric nor the missing-value token.
    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric {
        line: u64,
        column: usize,
        value: String,
    },

    #[error("column {column} has no observed values to impute from")]
    EmptyColumn { column: usize },

    #[error("class {class:?} has {count} instance(s), at least {required} required")]
    ClassTooSmall {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("dataset has a single class; inter-class differences are undefined")]
    SingleClass,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("difference {value} lies outside bin edges [{lo}, {hi}]")]
    ValueOutsideEdges { value: f64, lo: f64, hi: f64 },

    #[error("distributions do not share bin edges")]
    MismatchedEdges,

    #[error("attribute {attribute} is not integral; integer-unit bins need integral values")]
    NonIntegral { attribute: usize },

    #[error("feature subset is empty")]
    EmptyFeatureSet,

    #[error("feature index {index} out of range for {count} attributes")]
    FeatureOutOfRange { index: usize, count: usize },

    #[error("train and test partitions are incompatible: {0}")]
    Incompatible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv write error: {0}")]
    CsvWrite(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
