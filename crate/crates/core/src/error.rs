use std::path::PathBuf;

use thiserror::Error;

use crate::trace::Violation;

/// Errors produced anywhere in the prioritization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("suite failed validation with {} error(s); first: {}", .0.len(), .0[0])]
    InvalidSuite(Vec<Violation>),

    #[error("suite has no output signals; anti-pattern scores need at least one")]
    NoOutputs,

    #[error("unknown test id `{0}`")]
    UnknownTest(String),

    #[error("matrix `{label}`: {reason}")]
    Matrix { label: String, reason: String },

    #[error("matrix `{label}` does not match the suite: {reason}")]
    MatrixBinding { label: String, reason: String },

    #[error("unknown technique `{name}`; expected one of: {}", crate::prioritize::Technique::acronym_list())]
    UnknownTechnique { name: String },

    #[error("technique {technique} requires {required}, which was not provided")]
    MissingData {
        technique: &'static str,
        required: &'static str,
    },

    #[error("ordering is not a permutation of the matrix rows: {0}")]
    NotAPermutation(String),

    #[error("APFD is undefined: no mutant is killed by any test")]
    UndefinedApfd,

    #[error("sample list `{0}` is empty")]
    EmptySample(&'static str),

    #[error("{technique} run {run}: {source}")]
    Run {
        technique: String,
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
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

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
