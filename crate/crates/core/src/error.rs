use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    #[error("degenerate interval ({lo}, {hi})")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("discretized operator is not positive definite (det ≈ {det:e}); raise the order or check the interval")]
    NotPositiveDefinite { det: f64 },

    #[error("x = {x} is a singular endpoint of the weight")]
    SingularEndpoint { x: f64 },

    #[error("singular coefficient at s = {s}")]
    SingularCoefficient { s: f64 },

    #[error("step size collapsed; last good point s = {last_good}")]
    StepCollapse { last_good: f64 },

    #[error("Newton iteration did not converge (residual {residual:e})")]
    NewtonFailed { residual: f64 },

    #[error("state within the guard band of a fixed singular value at t = {t}")]
    GuardBand { t: f64 },

    #[error("asymptotic initialization out of range: {0}")]
    AsymptoticRange(String),

    #[error("no ω-mapping for this parameter set: {0}")]
    NoMapping(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
