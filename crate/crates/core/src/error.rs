use std::fmt;

use thiserror::Error;

/// Broad failure category; the CLI maps each to an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    Shape {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("sequence of length {len} exceeds max_seq_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate records: {}", .0.join(", "))]
    Duplicate(Vec<String>),
    #[error("template error: {0}")]
    Template(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("inconsistent graph, edges outside the flow graph: {}", .0.join(", "))]
    Consistency(Vec<String>),
    #[error("{context}: {cause}")]
    Io { context: String, cause: std::io::Error },
}

impl Error {
    pub fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape {
            op,
            left: Shape(left.0, left.1),
            right: Shape(right.0, right.1),
        }
    }

    pub fn io(context: impl Into<String>, cause: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            cause,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Template(_) => ErrorKind::Config,
            Error::Numeric(_) | Error::Shape { .. } | Error::SequenceTooLong { .. } => ErrorKind::Numeric,
            Error::Input(_)
            | Error::Parse { .. }
            | Error::Duplicate(_)
            | Error::Lookup(_)
            | Error::Consistency(_)
            | Error::Io { .. } => ErrorKind::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
