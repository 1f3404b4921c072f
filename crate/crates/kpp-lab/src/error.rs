use thiserror::Error;

/// Errors produced by solvers, validators and I/O across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "iteration did not converge after {iterations} iterations (last residual {residual:.3e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Newton iteration diverged: residual did not decrease over {halvings} step halvings")]
    Divergence { halvings: usize },

    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),

    #[error("linear solver failure: {0}")]
    LinearSolveFailure(String),

    #[error(
        "dominant eigenvalue estimate oscillates; rightmost eigenvalue is likely a complex pair"
    )]
    ComplexPair,

    #[error("state is not steady: residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotSteady { residual: f64, tolerance: f64 },

    #[error("base system is not bistable: {0}")]
    NotBistable(String),

    #[error("positivity lost at t = {time}: minimum entry {min:.3e}")]
    PositivityLoss { time: f64, min: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
