use std::io;

use thiserror::Error;

/// Errors raised anywhere in model construction, grounding, training or inference.
#[derive(Debug, Error)]
pub enum Error {
    /// The relational model is malformed (unknown names, bad arity, inconsistent helpers).
    #[error("model error: {0}")]
    Model(String),

    /// Data or evidence values that do not fit the model.
    #[error("data error: {0}")]
    Data(String),

    /// An API or command was called with arguments it cannot accept.
    #[error("usage error: {0}")]
    Usage(String),

    /// An expectation or proposal could not be formed (empty support, all weights zero).
    #[error("estimator error: {0}")]
    Estimator(String),

    /// A NaN or infinity appeared where a finite number is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Model-file syntax error.
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn estimator(msg: impl Into<String>) -> Self {
        Error::Estimator(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Prefix the message with extra context, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Model(m) => Error::Model(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Usage(m) => Error::Usage(format!("{ctx}: {m}")),
            Error::Estimator(m) => Error::Estimator(format!("{ctx}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
            Error::Syntax { line, col, msg } => Error::Syntax {
                line,
                col,
                msg: format!("{ctx}: {msg}"),
            },
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{ctx}: {e}"))),
        }
    }
}
