use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state is not hyperbolic at H={h}, Q={q} (b^2 + 4a = {discriminant})")]
    NotHyperbolic { h: f64, q: f64, discriminant: f64 },

    #[error("non-positive depth H={h} at x={x}")]
    NonPositiveDepth { h: f64, x: f64 },

    #[error("gate model undefined for non-positive flow Q={q}")]
    NonPositiveFlow { q: f64 },

    #[error("flow becomes critical near x={x} (margin {margin})")]
    CriticalFlow { x: f64, margin: f64 },

    #[error("transfer function pole proximity at s={re}{im:+}i (|denominator| = {magnitude})")]
    PoleProximity { re: f64, im: f64, magnitude: f64 },

    #[error(
        "boundary Newton iteration failed at the {side} boundary after {iterations} iterations (residual {residual})"
    )]
    NewtonDivergence { side: &'static str, iterations: usize, residual: f64 },

    #[error("depth underflow H={h} at node {node}")]
    DepthUnderflow { h: f64, node: usize },

    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("time must be non-decreasing: got {t} after {last}")]
    NonMonotoneTime { t: f64, last: f64 },

    #[error("array length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("pool {pool}: {source}")]
    Pool { pool: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Tags the error with a 1-based pool index.
    pub fn in_pool(self, pool: usize) -> Self {
        Error::Pool { pool, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
