//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("{op}: incompatible shapes {left} and {right}")]
    Shape {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("singular system: {context}; use a regularization strength > 0")]
    Singular { context: String },

    #[error("{what} index {index} out of range (must be < {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("missing state entry: machine {machine} has no '{key}' for this io")]
    MissingState { machine: String, key: String },

    #[error("ordering violation: {0}")]
    Ordering(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("population member {index} has no fresh assessment")]
    MissingAssessment { index: usize },

    #[error("objective failed on population member {index}: {source}")]
    ObjectiveFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub fn shape(op: &'static str, left: impl std::fmt::Display, right: impl std::fmt::Display) -> Self {
        Error::Shape {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
