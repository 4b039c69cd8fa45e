use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("invalid node index {0}")]
    InvalidNodeIndex(usize),

    #[error("invalid community index {index} (partition has {count} communities)")]
    InvalidCommunity { index: usize, count: usize },

    #[error("node {0} unassigned")]
    UnassignedNode(u64),

    #[error("node {0} assigned more than once")]
    DuplicateNode(u64),

    #[error("undefined modularity: graph has no arcs")]
    EmptyGraph,

    #[error("size mismatch: {what} has {found} entries, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    TooFewDistinctPoints { k: usize, distinct: usize },

    #[error("clusters {0} and {1} have coincident centroids")]
    CoincidentCentroids(usize, usize),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("{0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible degree target for node {node}: {message}")]
    InfeasibleTarget { node: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from the input data rather than from the
    /// environment or from a bug.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Io { .. } => false,
            Error::Stage { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}
