use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("line {line}: {morphemes} morphemes but {pos} pos tags")]
    AlignmentMismatch {
        line: usize,
        morphemes: usize,
        pos: usize,
    },

    #[error("line {line}: unknown split tag `{tag}`")]
    UnknownSplit { line: usize, tag: String },

    #[error("document `{id}` is in split `{split}` but has no label")]
    MissingLabel { id: String, split: String },

    #[error("corpus has no labeled documents")]
    NoLabeledDocuments,

    #[error("class `{class}` has {available} labeled documents, {required} required")]
    InsufficientClass {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("corpus splits are only partially assigned")]
    PartialSplits,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),

    #[error("embedding file {path}: {message}")]
    EmbeddingFormat { path: PathBuf, message: String },

    #[error("embedding dimension {found} does not match expected {expected}")]
    EmbeddingDim { expected: usize, found: usize },

    #[error("no embedding for {kind} token `{token}`")]
    MissingEmbedding { kind: &'static str, token: String },

    #[error("entity `{0}` has a zero-norm embedding")]
    ZeroNormEntity(String),

    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),

    #[error("adjacency row {row} has non-positive degree {degree}")]
    NonPositiveDegree { row: usize, degree: f64 },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("dropout rate {0} outside [0, 1)")]
    DropoutRate(f64),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("function is not deterministic across repeated evaluations ({first} vs {second})")]
    NonDeterministic { first: f64, second: f64 },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(String),

    #[error("at least one subgraph must be enabled")]
    NoSubgraphs,

    #[error("no labeled training documents")]
    EmptyTrainSplit,

    #[error("split `{0}` has no documents")]
    EmptySplit(String),

    #[error("loss became non-finite at epoch {epoch} (ce={ce}, con={con})")]
    NanLoss { epoch: usize, ce: f64, con: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("graph bundle: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
