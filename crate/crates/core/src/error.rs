use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A backward-recurrence denominator was non-positive: the growth rate
    /// lies below the largest eigenvalue of the tail operator.
    #[error("continued fraction pole at level {level} (denominator {denominator:e})")]
    Pole { level: usize, denominator: f64 },

    #[error("characteristic function does not change sign on [{lo:e}, {hi:e}]: h(lo) = {h_lo:e}, h(hi) = {h_hi:e}")]
    Bracket { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate:e}, residual {residual:e})")]
    Convergence { iterations: usize, estimate: f64, residual: f64 },

    #[error("symbol evaluation produced a non-finite value at k = {k:?}")]
    NonFiniteSymbol { k: [i64; 3] },

    #[error("Gevrey norm overflows; largest contribution from shell |k| = {shell:.3}")]
    Overflow { shell: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("state diverged (non-finite values) at step {step}")]
    Divergence { step: usize },

    #[error("analytic window violated: requested horizon {requested:.6} exceeds estimated existence time {limit:.6} (C_r = {c_r})")]
    AnalyticWindow { requested: f64, limit: f64, c_r: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for MgError {
    fn from(e: std::io::Error) -> Self {
        MgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MgError>;
