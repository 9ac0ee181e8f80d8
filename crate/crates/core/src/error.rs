use thiserror::Error;

/// Errors produced by the calculus, certification and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class precondition violated: beta*s = {beta_s} < 4n = {four_n}")]
    ClassPrecondition { beta_s: f64, four_n: f64 },

    #[error("symbol '{label}' does not supply derivative of order {order}")]
    MissingDerivative { label: String, order: usize },

    #[error("repeated axis {0} in multi-index")]
    RepeatedAxis(usize),

    #[error("kernel is square-integrable only for beta*s > n (got beta*s = {beta_s}, n = {n})")]
    KernelPrecondition { beta_s: f64, n: usize },

    #[error("field is under-resolved: spectral weight times coefficient overflows at {0} nodes")]
    Unresolved(usize),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("parameter window violated: {0}")]
    Window(String),

    #[error("solver diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },

    #[error("damping floor reached with growing residual after {iterations} iterations (residual {residual:e})")]
    DampingFloor { iterations: usize, residual: f64 },

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
