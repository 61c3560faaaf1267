use thiserror::Error;

/// Errors raised by graph, model, and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph is not decomposable")]
    NotDecomposable,

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("no valid single-edge move exists from the current graph")]
    NoValidMove,

    #[error("matrix of dimension {dim} is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { dim: usize, pivot: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("clique of size {size} exceeds the sample size n = {n}")]
    CliqueTooLarge { size: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that signal a misconfigured model or numerical failure,
    /// as opposed to malformed input.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::NotDecomposable
                | Error::NotPositiveDefinite { .. }
                | Error::CliqueTooLarge { .. }
                | Error::NoValidMove
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
