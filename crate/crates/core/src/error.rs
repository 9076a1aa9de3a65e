use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("capacity exceeded: {what} is {got}, limit {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// The requested quantity is not defined for this objective or domain.
    #[error("not available: {0}")]
    NotAvailable(String),

    #[error("run diverged at step {step} (particle {particle})")]
    Diverged { step: u64, particle: usize },

    #[error("stability condition violated: {0}")]
    Cfl(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (L1 residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("absolute continuity violated: q = 0 where p > 0 at cell {cell}")]
    AbsoluteContinuity { cell: usize },

    #[error("non-positive gap {gap:e} at t = {t} inside the fit window")]
    NonPositiveGap { t: f64, gap: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
