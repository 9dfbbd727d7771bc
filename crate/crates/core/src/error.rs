use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent query (unknown node, overlapping sets, empty side).
    #[error("query error: {0}")]
    Query(String),
    /// The requested computation exceeds the configured size guard.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// Structurally invalid model (cycle, duplicate id, misplaced regime node, ...).
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("invalid CPT for `{node}`: {reason}")]
    InvalidCpt { node: String, reason: String },
    /// Conditioning on an event of (numerically) zero probability.
    #[error("conditioning error: {0}")]
    Conditioning(String),
    /// Supplied pieces disagree with each other, e.g. coupling marginals vs CPT rows.
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("validation error: {0}")]
    Validation(String),
    /// Operation is defined only for a narrower class of inputs (e.g. binary variables).
    #[error("scope error: {0}")]
    Scope(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn query(msg: impl Into<String>) -> Self {
        Error::Query(msg.into())
    }

    pub(crate) fn semantic(msg: impl Into<String>) -> Self {
        Error::Semantic(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
