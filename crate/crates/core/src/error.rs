use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("integration failed: achieved error {achieved:e} exceeds requested {requested:e}")]
    IntegrationFailure { achieved: f64, requested: f64 },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("eigensolver did not converge (residual {residual:e})")]
    EigenNonConvergence { residual: f64 },

    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),

    #[error("legendre transform diverges: {0}")]
    Diverges(String),

    #[error("ledger invariant failed: {0}")]
    LedgerInvariant(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("bad kernel data: {0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
