//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants are grouped so that front ends can map them onto exit codes:
/// [`GpxError::is_regime`] identifies failures caused by the numerical regime
/// (truncation, branch proximity, non-convergence) rather than by bad input.
#[derive(Debug, Error)]
pub enum GpxError {
    /// Malformed or inconsistent input (non-finite samples, grid mismatch, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A parameter lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sampled profile does not reach its asymptotes at the domain boundary.
    #[error("truncation error: boundary residual {residual:.3e} exceeds {tolerance:.1e}")]
    Truncation { residual: f64, tolerance: f64 },

    /// The spectral parameter is on (or too close to) the branch cut.
    #[error("branch error: {0}")]
    Branch(String),

    /// A region with |r| < 1/2 reaches the boundary of the computational domain.
    #[error("unbounded dip: {0}")]
    UnboundedDip(String),

    /// The phase of a field changes by more than π between neighbouring nodes.
    #[error("under-resolved phase: {0}")]
    UnresolvedPhase(String),

    /// The denominators |r|² − ζ² of the diagonalised system degenerate.
    #[error("singular coefficients: {0}")]
    SingularCoefficient(String),

    /// The smallness regime required by a series expansion does not hold.
    #[error("regime error: {0}")]
    Regime(String),

    /// Step refinement of an ODE integrator did not converge.
    #[error("integrator did not converge: {0}")]
    Integrator(String),

    /// A quadrature failed its convergence or tail checks.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// The requested quantity has no implementation for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The time integrator produced non-finite values.
    #[error("blow-up at step {step}: {message}")]
    BlowUp { step: usize, message: String },

    /// An internal consistency check failed.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file or document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl GpxError {
    /// True for failures caused by the numerical regime rather than by the input.
    pub fn is_regime(&self) -> bool {
        matches!(
            self,
            GpxError::Truncation { .. }
                | GpxError::Branch(_)
                | GpxError::UnboundedDip(_)
                | GpxError::UnresolvedPhase(_)
                | GpxError::SingularCoefficient(_)
                | GpxError::Regime(_)
                | GpxError::Integrator(_)
                | GpxError::Quadrature(_)
                | GpxError::BlowUp { .. }
        )
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GpxError>;
