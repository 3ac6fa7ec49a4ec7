use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what} at x = {x:?}")]
    Evaluation { what: &'static str, x: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line through the base point does not meet the trust region")]
    OutsideRegion,

    #[error("no local maximum of f along the line inside the trust region")]
    NoLineMax,

    #[error("level crossing not found before leaving the trust region")]
    CrossingOutsideRegion,

    #[error("direction is not a descent direction (slope {slope:e})")]
    BadDirection { slope: f64 },

    #[error("direction is nearly tangent to the level set (v·∇f = {denom:e})")]
    DegenerateDenominator { denom: f64 },

    #[error("v^T H v = {0:e} is not negative")]
    NotConcaveAlongV(f64),

    #[error("critical level cannot be estimated: {0}")]
    NoEstimate(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("Newton iteration broke down (condition estimate {cond:e})")]
    NewtonBreakdown { cond: f64 },

    #[error("(Av) cannot shorten the chord any further")]
    AvStalled,

    #[error("(l↑) impossible: f at the midpoint does not exceed the level")]
    LUpImpossible,

    #[error("gradient is parallel to v; base point is a critical point candidate")]
    CriticalCandidate,

    #[error("base point is not a local maximum along v (slope {slope:e})")]
    NotLineMax { slope: f64 },

    #[error("bad endpoints: {0}")]
    BadEndpoints(String),

    #[error("check not applicable: {0}")]
    NotApplicable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
