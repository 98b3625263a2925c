use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("vocabulary is empty")]
    EmptyVocab,

    #[error("duplicate token {token:?} at line {line}")]
    DuplicateToken { token: String, line: usize },

    #[error("empty token at line {line}")]
    EmptyToken { line: usize },

    #[error("special token {0} missing from vocabulary")]
    MissingSpecialToken(&'static str),

    #[error("lexicon contains no words")]
    EmptyLexicon,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("record format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unrecognized record file header")]
    BadHeader,

    #[error("record {index} is truncated")]
    TruncatedRecord { index: usize },

    #[error("record {index}: {detail}")]
    MalformedRecord { index: usize, detail: String },

    #[error("dimension mismatch in record {index}: {detail}")]
    DimensionMismatch { index: usize, detail: String },

    #[error("sidecar has {sidecar} entries but record file has {records}")]
    SidecarMismatch { sidecar: usize, records: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True when the failure came from the filesystem or a stream rather
    /// than from the data itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
