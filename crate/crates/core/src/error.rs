use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid horizon: t = {t} is after T = {horizon}")]
    InvalidHorizon { t: f64, horizon: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported inventory penalty `{0}` (expected `one` or `square`)")]
    UnsupportedPenalty(String),

    #[error("model does not satisfy the exponential-utility hypothesis: {0}")]
    HypothesisViolation(String),

    #[error(
        "truncated ODE lost positivity at q = {q}, t = {t}; increase q_max or refine the grid"
    )]
    TruncationTooSmall { q: i64, t: f64 },

    #[error("inventory {q} is outside the truncation |q| < {q_max}")]
    OutOfTruncation { q: i64, q_max: i64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("degenerate histogram range [{lo}, {hi}]")]
    DegenerateRange { lo: f64, hi: f64 },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
