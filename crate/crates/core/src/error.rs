use thiserror::Error;

/// Errors raised by geometry, gradient assembly and the nonlinear solver.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("a closed polygon needs at least {min} vertices, got {found}")]
    TooFewVertices { min: usize, found: usize },
    #[error("vertex {index} is not finite")]
    NonFiniteVertex { index: usize },
    #[error("degenerate edge ending at vertex {index} (length {length:e})")]
    DegenerateEdge { index: usize, length: f64 },
    #[error("neighbouring edges at vertex {index} are anti-parallel (curve folds back)")]
    CuspAtVertex { index: usize },
    #[error("central stencil at vertex {index} degenerates (|X[i+1] - X[i-1]| = {magnitude:e})")]
    DegenerateStencil { index: usize, magnitude: f64 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("Gram matrix of length and area gradients is singular (det {det:e}, diagonal product {scale:e})")]
    SingularGram { det: f64, scale: f64 },
    #[error("matrix is singular: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("Jacobian is singular: pivot {pivot:e} in column {column}")]
    SingularJacobian { column: usize, pivot: f64 },
    #[error("residual evaluation produced a non-finite value")]
    NonFiniteResidual,
    #[error("nonlinear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("discrete chain rule violated by {residual:e}")]
    ChainRuleViolation { residual: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl FlowError {
    /// True for failures of the nonlinear solve rather than of the geometry.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            FlowError::SolverFailure { .. } | FlowError::SingularJacobian { .. } | FlowError::NonFiniteResidual
        )
    }
}

pub type Result<T, E = FlowError> = std::result::Result<T, E>;
