//! Error type shared across the crate.
//!
//! Variants are grouped by how a caller should react: configuration and
//! input validation problems are recoverable user errors, while `Numeric`
//! reports a diverged simulation together with the node and slot where the
//! blow-up was first observed.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation.
    #[error("config: {field} = {value}: {constraint}")]
    Config {
        field: String,
        value: String,
        constraint: String,
    },

    /// Graph construction rejected an edge list.
    #[error("graph: {0}")]
    Graph(String),

    /// A CSV row could not be parsed; `line` is 1-based in the file.
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },

    /// A dataset column has zero variance and cannot be z-scored.
    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    /// The batch least-squares design matrix is rank deficient.
    #[error("design matrix is rank deficient")]
    RankDeficient,

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    /// The API was called in an unsupported way (out-of-order slots,
    /// missing neighbor state, empty collections).
    #[error("usage: {0}")]
    Usage(String),

    /// A state update produced a non-finite value.
    #[error("numeric failure at node {node}, slot {slot}: {message}")]
    Numeric {
        node: usize,
        slot: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: &str, value: impl std::fmt::Display, constraint: &str) -> Self {
        Error::Config {
            field: field.to_string(),
            value: value.to_string(),
            constraint: constraint.to_string(),
        }
    }

    /// Exit code class: 1 for validation errors, 2 for runtime/numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Graph(_)
            | Error::Csv { .. }
            | Error::ZeroVariance { .. }
            | Error::RankDeficient
            | Error::Domain(_)
            | Error::Usage(_) => 1,
            Error::Numeric { .. } | Error::Io(_) => 2,
        }
    }
}
