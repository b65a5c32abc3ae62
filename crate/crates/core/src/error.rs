use thiserror::Error;

/// Position-annotated failure from one of the text formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("state is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("strategy {strategy} not applicable: {reason}")]
    Strategy { strategy: &'static str, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::InvalidSystem(_) => "invalid_system",
            Error::NotHermitian(_) => "not_hermitian",
            Error::NotPositive(_) => "not_positive",
            Error::Strategy { .. } => "strategy",
            Error::InvalidInput(_) => "invalid_input",
            Error::Dimension { .. } => "dimension",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
