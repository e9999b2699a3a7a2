use std::io;

use crate::solver::PprSolution;

/// Errors produced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("push budget of {budget} exhausted before convergence")]
    PushBudgetExceeded {
        budget: u64,
        partial: Box<PprSolution>,
    },

    #[error("iteration cap of {cap} reached before convergence (last change {last_change:e})")]
    IterationCap { cap: usize, last_change: f64 },

    #[error("dense oracle refused: {nodes} nodes exceeds cap of {cap}")]
    OracleTooLarge { nodes: usize, cap: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("calibration failed: {message}")]
    CalibrationFailed {
        message: String,
        trace: Vec<(f64, f64)>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
