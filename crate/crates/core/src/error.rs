use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },

    #[error("empty sequence: {0}")]
    EmptySequence(&'static str),

    #[error("loss node is not a scalar (shape {0:?})")]
    NonScalarLoss(Vec<usize>),

    #[error("tape already consumed by a backward pass")]
    TapeConsumed,

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("too few events: need at least {needed}, got {got}")]
    TooFewEvents { needed: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}: line {line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing directory {0}")]
    MissingRoot(PathBuf),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch} before any checkpoint was kept")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidTensor(_) => "invalid_tensor",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::TokenOutOfRange { .. } => "token_out_of_range",
            Error::EmptySequence(_) => "empty_sequence",
            Error::NonScalarLoss(_) => "non_scalar_loss",
            Error::TapeConsumed => "tape_consumed",
            Error::UnknownParam(_) => "unknown_param",
            Error::NonFinite(_) => "non_finite",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::Config(_) => "config",
            Error::TooFewEvents { .. } => "too_few_events",
            Error::EmptyDataset => "empty_dataset",
            Error::Schema { .. } => "schema",
            Error::MissingRoot(_) => "missing_root",
            Error::Checkpoint(_) => "checkpoint",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
