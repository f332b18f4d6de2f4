use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: label out of domain: {value:?}")]
    LabelDomain { line: u64, value: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    FieldCount {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("invalid hour stamp {0:?} (expected YYMMDDHH)")]
    HourStamp(String),

    #[error("hour stamp {stamp} precedes origin {origin}")]
    HourBeforeOrigin { stamp: String, origin: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{phase} batch {batch}: {source}")]
    Training {
        phase: String,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorKind::Config,
            Error::Shape(_)
            | Error::IndexOutOfRange { .. }
            | Error::NonFinite(_)
            | Error::BatchTooSmall(_) => ErrorKind::Numeric,
            Error::Training { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
