use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the lab pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("wav format error: {0}")]
    Format(String),

    #[error("infeasible alignment: {frames} frames cannot emit a target needing {required}")]
    InfeasibleAlignment { frames: usize, required: usize },

    #[error("training diverged at epoch {epoch}")]
    TrainingFailure { epoch: usize },

    #[error("corrupt tokens: {0}")]
    CorruptTokens(String),

    #[error("missing clean baseline for {0}")]
    MissingBaseline(String),

    #[error("missing configurations: {0:?}")]
    MissingConfig(Vec<String>),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable code used when a failure is recorded instead of raised.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::NonFinite { .. } => "non-finite",
            Error::Format(_) => "format",
            Error::InfeasibleAlignment { .. } => "infeasible-alignment",
            Error::TrainingFailure { .. } => "training-failure",
            Error::CorruptTokens(_) => "corrupt-tokens",
            Error::MissingBaseline(_) => "missing-baseline",
            Error::MissingConfig(_) => "missing-config",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::CorruptFile { .. } => "corrupt-file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
