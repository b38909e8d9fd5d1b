//! Pipeline-level errors and their process exit codes.

use detkit_core::ensembling::EnsembleError;
use detkit_core::scaling::ScalingError;

/// Exit codes: 2 usage, 3 data, 4 infeasible. Success is 0.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
}

impl PipelineError {
    pub fn usage(message: impl Into<String>) -> Self {
        PipelineError::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        PipelineError::Data(message.into())
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        PipelineError::Infeasible(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Infeasible(_) => 4,
        }
    }
}

/// Attaches subcommand context to module errors, sorting them into data vs
/// infeasible exits.
pub fn scaling_error(context: &str, error: ScalingError) -> PipelineError {
    match error {
        ScalingError::NoFeasibleTriple { .. } | ScalingError::EmptyAxis(_) => {
            PipelineError::infeasible(format!("{context}: {error}"))
        }
        other => PipelineError::data(format!("{context}: {other}")),
    }
}

pub fn ensemble_error(context: &str, error: EnsembleError) -> PipelineError {
    match error {
        EnsembleError::EmptyGrid => PipelineError::infeasible(format!("{context}: {error}")),
        other => PipelineError::data(format!("{context}: {other}")),
    }
}

pub fn data_error(context: &str, error: impl std::fmt::Display) -> PipelineError {
    PipelineError::data(format!("{context}: {error}"))
}
