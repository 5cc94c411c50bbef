use thiserror::Error;

/// Errors raised by grid construction, the elliptic solvers and the
/// critical-point finders.
#[derive(Debug, Error)]
pub enum KgmError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {relative_residual:.3e})")]
    NotConverged {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("operator is not positive definite (curvature {0:.3e})")]
    Indefinite(f64),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("degenerate Neumann operator: max (v+U)^2 = {0:.3e} below threshold")]
    DegenerateOperator(f64),

    #[error("Neumann data incompatible: defect {0:.3e}")]
    Incompatible(f64),

    #[error("eigensolver did not converge after {0} iterations")]
    EigenNotConverged(usize),

    #[error("line search failed: step fell below {0:.3e}")]
    LineSearch(f64),

    #[error("no negative endpoint found after {0} doublings")]
    NoNegativeEndpoint(usize),

    #[error("mountain pass failed: {0}")]
    MountainPass(String),

    #[error("newton refinement failed: {0}")]
    Newton(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, KgmError>;
