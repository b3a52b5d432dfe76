use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Matrix and entry indices in messages are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// The model document is well-formed JSON but describes an invalid model.
    #[error("{0}")]
    Model(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a generator: {0}")]
    NotGenerator(String),
    #[error("reducible matrix{0}")]
    Reducible(String),
    #[error("not irreducible: stationary system is singular")]
    NotIrreducible,
    #[error("environment not cyclic")]
    NotCyclic,
    #[error("{0}")]
    Convergence(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for user or model errors, as opposed to numerical failures.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. } | Error::Model(_) | Error::InvalidArgument(_) | Error::NotCyclic
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
