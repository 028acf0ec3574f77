use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: `{value}` is not a number")]
    NotNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("malformed data file: {0}")]
    Csv(String),

    #[error("no samples")]
    Empty,

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("chromosome length mismatch: expected {expected} genes, found {found}")]
    ChromosomeLength { expected: usize, found: usize },

    #[error("sample {index} has no target")]
    MissingTarget { index: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("linear system stayed singular after {retries} damping increases")]
    SingularSystem { retries: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("train/test split mismatch between reports")]
    SplitMismatch,

    #[error("model document: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
