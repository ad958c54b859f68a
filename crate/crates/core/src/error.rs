use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus {0}: must be at least 3")]
    InvalidModulus(u64),

    #[error("invalid residue {residue} mod {modulus}: {reason}")]
    InvalidResidue {
        modulus: u64,
        residue: u64,
        reason: &'static str,
    },

    #[error("invalid residue partition: {0}")]
    InvalidPartition(String),

    #[error("untracked residue {0}")]
    UntrackedResidue(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("tail not negligible: limit {limit} < 41 * x (x = {x})")]
    TailNotNegligible { x: f64, limit: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("insufficient data: requested height {requested} exceeds completeness bound {available}")]
    InsufficientData { requested: f64, available: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration too expensive: {vectors} coefficient vectors (limit 1e9)")]
    TooExpensive { vectors: f64 },

    #[error("off-line zero for character {label} at {beta}+{gamma}i; use the barrier module")]
    OffLineZero { label: String, beta: f64, gamma: f64 },

    #[error("event sink aborted after segment ending at {last_completed}: {message}")]
    SinkAborted { last_completed: u64, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
