use std::path::PathBuf;

/// Errors produced by the model, solvers, and file readers/writers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("label offset {offset} outside [{lower}, {upper}] in dimension {dim}")]
    LabelOutOfRange {
        dim: usize,
        offset: i32,
        lower: i32,
        upper: i32,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state space of {states} exceeds the enumeration limit {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("golden file {suite}: {message}")]
    Golden { suite: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
