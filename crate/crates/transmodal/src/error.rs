//! The crate-wide error type.

use thiserror::Error;

/// Errors reported by parsing, validation and the bounded search engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("missing valuation for atom {0}")]
    MissingAtom(String),

    #[error("unknown logic `{0}`")]
    UnknownLogic(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
