use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate synset id `{0}`")]
    DuplicateSynset(String),

    #[error("edge {child} -> {parent} references unknown synset `{missing}`")]
    DanglingEdge {
        child: String,
        parent: String,
        missing: String,
    },

    #[error("hypernym cycle detected through: {}", .0.join(", "))]
    Cycle(Vec<String>),

    #[error("unknown synset `{0}`")]
    UnknownSynset(String),

    #[error("`{x}` and `{y}` have no common ancestor")]
    NoCommonAncestor { x: String, y: String },

    #[error("graph has {} roots ({}); inject a virtual root", .0.len(), .0.join(", "))]
    MultipleRoots(Vec<String>),

    #[error("graph too small: {found} synsets, need at least {required}")]
    GraphTooSmall { found: usize, required: usize },

    #[error("{0}")]
    Sampling(String),

    #[error("invalid {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error("missing embedding for key `{0}`")]
    MissingKey(String),

    #[error("layer {layer} out of range for store with {layer_count} layers")]
    LayerOutOfRange { layer: usize, layer_count: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: non-finite loss ({loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("empty example set: {0}")]
    EmptyExamples(&'static str),

    #[error(
        "no root admits a spanning arborescence; largest reachable component has {} of {total} nodes",
        .largest_component.len()
    )]
    NoFeasibleRoot {
        largest_component: Vec<String>,
        total: usize,
    },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error(
        "node sets differ; only in prediction: [{}], only in truth: [{}]",
        .only_pred.join(", "),
        .only_truth.join(", ")
    )]
    NodeSetMismatch {
        only_pred: Vec<String>,
        only_truth: Vec<String>,
    },

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("category `{0}` has no scored concepts")]
    EmptyCategory(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            message: message.into(),
        }
    }
}
