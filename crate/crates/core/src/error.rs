use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid robot model: {0}")]
    Model(String),

    #[error("joint {joint} value {value} outside limits [{lo}, {hi}]")]
    JointLimit {
        joint: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("node cap exceeded: {candidates} candidate nodes > cap {cap}")]
    NodeCapExceeded { candidates: usize, cap: usize },

    #[error("roadmap for {0} is empty: every candidate node was discarded")]
    EmptyRoadmap(&'static str),

    #[error("pair enumeration budget exceeded: {pairs} same-torso pairs > budget {budget}")]
    PairBudgetExceeded { pairs: u64, budget: u64 },

    #[error("torso mismatch: node {a} has torso index {ta}, node {b} has torso index {tb}")]
    TorsoMismatch { a: u32, b: u32, ta: u32, tb: u32 },

    #[error("no connectable node: {0}")]
    NoConnectableNode(String),

    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    #[error(transparent)]
    Format(#[from] crate::format::FormatError),

    /// A JSON artifact that parsed but is not acceptable (version, empty payload).
    #[error("malformed file: {0}")]
    FileFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
