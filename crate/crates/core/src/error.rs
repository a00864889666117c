//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, field, and solver operations.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A Finsler spec violates its invariants (non-SPD metric, Randers drift too large).
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An iterative numeric procedure failed to converge; carries the final residual.
    #[error("numeric failure in {context}: residual {residual:.3e} after {iters} iterations")]
    NumericFailure {
        context: &'static str,
        residual: f64,
        iters: usize,
    },

    /// Brute-force conjugate search hit the boundary of its search box.
    #[error("search box too small: maximizer at ({0:.4}, {1:.4}) touches the boundary")]
    BoxTooSmall(f64, f64),

    /// A numeric dual Hessian has a non-positive eigenvalue: the spec is not strongly convex.
    #[error("convexity violation: dual Hessian eigenvalue {0:.3e} <= 0")]
    ConvexityViolation(f64),

    /// A vortex configuration violates its invariants.
    #[error("configuration rejected: {0}")]
    ConfigRejected(String),

    /// Two vortices coincide, making the pair energy singular.
    #[error("singular configuration: vortices {0} and {1} coincide")]
    SingularConfiguration(usize, usize),

    /// An operation precondition does not hold.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// The envelope formula for the reduced gradient is invalid at this point.
    #[error("envelope invalid: position Hessian min eigenvalue {0:.3e} <= 0")]
    EnvelopeInvalid(f64),
}

pub type Result<T> = std::result::Result<T, CoreError>;
