use thiserror::Error;

use crate::lp::LpStatus;
use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("game failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),

    #[error("stage mismatch: expected stage {expected}, got {found}")]
    StageMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} exceeds cap: {actual} > {limit}")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("linear program {context} ended with status {status:?}")]
    Lp { status: LpStatus, context: String },

    #[error("imperfect recall for player {player}: {first} vs {second}")]
    ImperfectRecall {
        player: usize,
        first: String,
        second: String,
    },

    #[error("regression diverged at stage {stage}: error rose for {epochs} consecutive epochs (last mse {mse:e})")]
    Divergence { stage: usize, epochs: usize, mse: f64 },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
