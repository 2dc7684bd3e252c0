use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible action at step {step}: {reason}")]
    InfeasibleAction { step: usize, reason: String },

    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("extinct state: population is zero")]
    ExtinctState,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 invalid input, 3 numerical or
    /// policy failure, 4 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::DegenerateInput(_)
            | Error::UnsupportedInstance(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::InfeasibleAction { .. }
            | Error::NumericalFailure(_)
            | Error::ExtinctState => 3,
            Error::Capacity(_) => 4,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
