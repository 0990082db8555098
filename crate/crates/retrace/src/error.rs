//! Error taxonomy shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Caller passed parameters outside the supported range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Text could not be parsed into the expected structure.
    #[error("parse error: {0}")]
    Parse(String),

    /// An operation was invoked on a task kind it does not support.
    #[error("unsupported task kind: expected {expected}, got {got}")]
    Kind { expected: &'static str, got: String },

    /// The improvement module cannot honour the feedback it was given.
    #[error("improvement impossible: {0}")]
    ImprovementImpossible(String),

    /// The requested triplet proportion cannot be achieved from this pool.
    #[error("rebalance unattainable: {0}")]
    Balance(String),

    /// A trajectory violates a structural invariant.
    #[error("malformed trajectory {id}: {msg}")]
    Data { id: String, msg: String },

    /// Training or evaluation was asked to run on unusable input.
    #[error("update error: {0}")]
    Update(String),

    /// The completion provider returned text we cannot interpret.
    #[error("provider returned malformed completion: {0}")]
    ProviderFormat(String),

    /// The completion provider could not be reached after retries.
    #[error("provider transport failure: {0}")]
    ProviderTransport(String),

    /// A checkpointed file changed on disk since it was recorded.
    #[error("checkpoint integrity violation: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
