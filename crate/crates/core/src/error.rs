use thiserror::Error;

/// Broad category of a failure, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed documents, inconsistent shapes, invalid arguments.
    Data,
    /// Numerical failure: divergence, overflow, non-finite values.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph document: {0}")]
    Parse(String),

    #[error("edge {edge} references unknown {kind} id {id}")]
    DanglingReference {
        edge: usize,
        kind: &'static str,
        id: usize,
    },

    #[error("duplicate edge between factor {factor} and variable {variable}")]
    DuplicateEdge { factor: usize, variable: usize },

    #[error("variable {variable} is both a parent and a child of factor {factor}")]
    OverlappingDirections { factor: usize, variable: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{context} diverged at epoch {epoch}")]
    Diverged { context: String, epoch: usize },

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("link function out of domain: {0}")]
    Domain(String),

    #[error("link function overflow: {0}")]
    Overflow(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Diverged { .. } | Error::Overflow(_) => ErrorKind::Numerical,
            Error::Row { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn shape(what: &'static str, expected: usize, found: usize) -> Self {
        Error::ShapeMismatch {
            what,
            expected,
            found,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
