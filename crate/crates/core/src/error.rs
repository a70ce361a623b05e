use thiserror::Error;

/// Errors produced anywhere in the estimation chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no estimate: {0}")]
    NoEstimate(&'static str),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("training failed: {0}")]
    TrainingFailure(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed {kind} file at byte {offset}: {reason}")]
    Format {
        kind: &'static str,
        offset: u64,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
