use thiserror::Error;

/// Errors raised across the analytic, stochastic and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A resolvent-type sum was evaluated too close to a point of the spectrum.
    #[error("evaluation point within {distance:e} of the spectrum (threshold {threshold:e})")]
    PoleProximity { distance: f64, threshold: f64 },

    #[error("fixed-point solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("continuation step collapsed at eta = {eta:e}")]
    StepCollapse { eta: f64 },

    #[error("no sign change of t*m_V'(xi) - 1 left of the support: {0}")]
    NoBracket(String),

    #[error("edge coefficient R3 = {0:e} is not positive")]
    NegativeCube(f64),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("counting function is not strictly increasing: {0}")]
    NonMonotoneCdf(String),

    #[error("symmetric eigensolver failed: {0}")]
    EigenFailure(String),

    #[error("SDE step underflow at time {time:e} (dt = {dt:e})")]
    StepUnderflow { time: f64, dt: f64 },

    #[error("index out of range: {0}")]
    IndexOverflow(String),

    #[error("exponent hierarchy violated: {0}")]
    BadHierarchy(String),

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
