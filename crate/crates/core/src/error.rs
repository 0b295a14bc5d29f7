use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rule file line {line}: {message}")]
    RuleParse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u8, expected: u8 },

    #[error("invalid sample: {0}")]
    Sample(String),

    #[error("adaptation diverged at step {step}; parameters restored")]
    Diverged { step: usize },

    #[error("constraint too long: {tokens} forced tokens exceed max_len {max_len}")]
    ConstraintTooLong { tokens: usize, max_len: usize },

    #[error("source too long: {tokens} tokens (limit {limit})")]
    SourceTooLong { tokens: usize, limit: usize },

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("remote engine: {0}")]
    Remote(String),

    #[error("engine failure on sentence {index}: {message}")]
    Engine { index: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
