use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("self-loop ({0}, {0}) in edge list")]
    SelfLoop(usize),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty node set: {0}")]
    EmptySet(&'static str),

    #[error("graph has no edges")]
    EdgelessGraph,

    #[error("feature value {value} at node {node}, dim {dim} outside [0, 1]; rescale the features before flipping")]
    FeatureRange { node: usize, dim: usize, value: f64 },

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },

    #[error("non-finite gradient passed to the optimizer")]
    NonFiniteGradient,

    #[error("tape does not match the model: {0}")]
    StaleTape(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("not enough labeled nodes: {0}")]
    InsufficientLabels(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a run blowing up rather than by bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFiniteGradient)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
