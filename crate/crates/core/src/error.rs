use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library. The CLI maps every variant to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty document")]
    EmptyDocument,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty sentence")]
    EmptySentence,
    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} {index} out of range (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("not a probability distribution (sum = {0})")]
    NotNormalized(f64),
    #[error("zero vector")]
    ZeroVector,
    #[error("all query words are out of vocabulary")]
    AllOutOfVocabulary,
    #[error("divergence is infinite: q[{0}] = 0 where p[{0}] > 0")]
    SupportViolation(usize),
    #[error("no candidate words")]
    NoCandidates,
    #[error("user {user} has {have} candidates, fewer than {need}")]
    TooFewCandidates {
        user: usize,
        have: usize,
        need: usize,
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

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        Error::MalformedLine {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }
}
