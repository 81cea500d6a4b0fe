use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid interval [{a}, {b}]: bounds must satisfy 0 <= a <= b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("no sample falls in [{lo}, {hi}]: horizon/sampling mismatch")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("formula horizon {horizon}s from t={t}s exceeds the trace end {end}s")]
    HorizonExceeded { horizon: f64, t: f64, end: f64 },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("negated until has no negation-normal form in this fragment")]
    UnsupportedNegation,

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("state diverged (non-finite or |x| > {limit:e}) at t={t}s")]
    Divergence { t: f64, limit: f64 },

    #[error("input value {value} outside bounds [{lo}, {hi}] on channel `{channel}`")]
    BoundViolation {
        channel: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unknown plant `{0}`")]
    UnknownPlant(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training failed: {0}")]
    TrainingFailed(String),

    #[error("distillation produced no valid candidate: {0}")]
    DistillationFailed(String),

    #[error("objective evaluation non-finite at iteration {iter}")]
    NonFiniteObjective { iter: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
