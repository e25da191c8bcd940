use alloc::string::String;
use num_complex::Complex64;

/// Failures raised by channel construction, criteria and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("coupling pair at index {index} is not normalized (alpha^2 + beta^2 = {norm})")]
    Unnormalized { index: usize, norm: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension {dim} is below the minimum {min}")]
    DimensionTooSmall { dim: usize, min: usize },
    #[error("window [0, {window}] does not fit in a truncation of dimension {dim}")]
    WindowExceedsTruncation { window: usize, dim: usize },
    #[error("death rate mu_{index} vanishes")]
    ZeroDeathRate { index: usize },
    #[error("birth rate lambda_{index} vanishes")]
    ZeroBirthRate { index: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("explicit coupling list has {len} entries, index {needed} required")]
    SequenceTooShort { needed: usize, len: usize },
    #[error("criterion not applicable: {0}")]
    NotApplicable(String),
    #[error("no invariant state at this truncation (closest eigenvalue {eigenvalue})")]
    NoInvariantState { eigenvalue: Complex64 },
    #[error("no convergence after {iterations} iterations (last distance {distance:e})")]
    NonConvergence { iterations: usize, distance: f64 },
    #[error("state has eigenvalue {0:e}, below the clipping threshold")]
    NotPositive(f64),
    #[error("quadrature error estimate {estimate:e} exceeds budget {budget:e}; refine quadrature")]
    QuadratureBudget { estimate: f64, budget: f64 },
    #[error("singular matrix encountered at pivot {0}")]
    Singular(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
