use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown field kind `{0}`")]
    UnknownFieldKind(String),

    #[error("field `{kind}` takes {expected} parameters, got {got}")]
    ParamArity { kind: &'static str, expected: &'static str, got: usize },

    #[error("invalid parameter for `{kind}`: {reason}")]
    InvalidParam { kind: String, reason: String },

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("coincident extrapolation anchors at t = {0}")]
    CoincidentAnchors(f64),

    #[error("arm {arm} at step {step} overruns horizon {horizon}")]
    ArmOverrun { step: usize, arm: usize, horizon: usize },

    #[error("arm {0} is not in the agent's arm set")]
    UnknownArm(usize),

    #[error("bandit agent has unplayed arms; initialize before UCB selection")]
    Uninitialized,

    #[error("registry horizon {registry} does not match grid horizon {grid}")]
    HorizonMismatch { registry: usize, grid: usize },

    #[error("suboptimal arm {0} has a non-positive gap")]
    ZeroGap(usize),

    #[error("trajectories were produced on different grids or initial states")]
    GridMismatch,

    #[error("region {0} contains no decisions")]
    EmptyRegion(usize),

    #[error("skip set is outside the single-skip regime: {0}")]
    InvalidSkipSet(String),

    #[error("field has no known smoothness bounds")]
    UnknownBounds,

    #[error("training diverged at step {step} (loss = {loss})")]
    Divergence { step: usize, loss: f64 },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Divergence { .. })
    }
}
