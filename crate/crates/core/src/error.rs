use thiserror::Error;

/// Hypothesis labels reported by [`Error::HypothesisViolation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Hypothesis {
    /// Sign and bound conditions on the subdiagonal couplings.
    A2,
    /// Nonempty coupling region.
    A3,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hypothesis::A2 => write!(f, "(A2)"),
            Hypothesis::A3 => write!(f, "(A3)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("hypothesis {hypothesis} violated: {detail}")]
    HypothesisViolation { hypothesis: Hypothesis, detail: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("time step {dt} exceeds stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("horizon {horizon} is not an integer multiple of dt = {dt}")]
    GridMismatch { horizon: f64, dt: f64 },

    #[error("observability ratio undefined for zero initial data")]
    UndefinedRatio,

    #[error("initial data outside the declared space: {0}")]
    SpaceViolation(String),

    #[error("dimension {dimension} exceeds dense cap {cap}")]
    TooLarge { dimension: usize, cap: usize },

    #[error("not controllable at T = {horizon}: {reason}")]
    NotControllable { horizon: f64, reason: String },

    #[error("cannot evaluate: {0}")]
    CannotEvaluate(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
