use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid model: {0}")]
    Validation(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("observation {observation} has probability {probability:e} under action {action}")]
    ZeroProbabilityObservation {
        action: usize,
        observation: usize,
        probability: f64,
    },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("row {row} of the modified transition table under action {action} sums to {sum}")]
    RowNormalization { row: usize, action: usize, sum: f64 },

    #[error("belief tree would need {nodes} nodes (limit {limit})")]
    TreeTooLarge { nodes: u128, limit: u128 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
