use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("diagonal family requires |gamma| <= 1, got {0}")]
    GammaOutOfRange(f64),

    #[error("fiber direction must be a nonzero vector")]
    ZeroDirection,

    #[error("group variant {variant} requires theta = {required}")]
    IncompatibleVariant {
        variant: &'static str,
        required: &'static str,
    },

    #[error("SE(2)_n requires n >= 1, got {0}")]
    BadCoverIndex(u32),

    #[error("drift matrix does not commute with theta (residual {0:e})")]
    NonCommuting(f64),

    #[error("control range must satisfy u_min < 0 < u_max, got [{0}, {1}]")]
    BadControlRange(f64, f64),

    #[error("control value {u} outside [{u_min}, {u_max}]")]
    ControlOutOfRange { u: f64, u_min: f64, u_max: f64 },

    #[error("piece durations must be positive and finite, got {0}")]
    BadDuration(f64),

    #[error("integration step must be positive, got {0}")]
    BadStep(f64),

    #[error("A(u) is singular at u = {0}")]
    SingularAu(f64),

    #[error("input field has alpha = 0")]
    ZeroAlpha,

    #[error("drift matrix is singular (det = {0:e})")]
    SingularDrift(f64),

    #[error("nilrank is {found}, operation requires {required}")]
    Nilrank { found: usize, required: &'static str },

    #[error("Lie algebra rank condition violated: {0}")]
    LarcViolated(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no sign change of H2 on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("planner failed: {0}")]
    Planner(String),

    #[error("linear field does not descend to the quotient: {0}")]
    DoesNotDescend(String),
}
