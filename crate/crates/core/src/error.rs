use std::path::PathBuf;

use crate::diagnostics::Group;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("token offsets do not tile the text of trace {0:?}")]
    OffsetMismatch(String),
    #[error("entropy length does not match token count in trace {0:?}")]
    EntropyLengthMismatch(String),
    #[error("entropy values must be finite and non-negative (trace {0:?})")]
    InvalidEntropy(String),
    #[error("duplicate trace id {0:?}")]
    DuplicateTraceId(String),
    #[error("base vocabulary size {declared} is smaller than the {observed} distinct base tokens observed")]
    BaseVocabTooSmall { declared: usize, observed: usize },
    #[error("prefix {prefix} exceeds the {available} merges in the table")]
    PrefixOutOfRange { prefix: usize, available: usize },
    #[error("base token {token:?} at position {position} is not in the base vocabulary")]
    UnknownBaseToken { position: usize, token: String },
    #[error("inconsistent merge table: {0}")]
    InconsistentTable(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("trace {0:?} has no entropy values")]
    MissingEntropy(String),
    #[error("log2 vocabulary size must be positive")]
    NonPositiveVocab,
    #[error("role sets differ between the two scorers")]
    RoleMismatch,
    #[error("supertoken id {0} has no entry in the category map")]
    UnmappedSupertoken(u32),
    #[error("no sequence with at least two events in group {0:?}")]
    EmptyGroup(Group),
    #[error("proportion {0} is outside [0, 1]")]
    InvalidProportion(f64),
    #[error("zoom window {start}..{end} lies outside the {len} output tokens")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported format_version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Invariant(_) => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }
}
