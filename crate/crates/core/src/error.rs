use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Table or matrix dimensions do not match the declared alphabets.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operation only defined for binary (two-outcome) alphabets.
    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("infeasible correlation representation: probability {value:.3e} at (a={a}, b={b}, x={x}, y={y})")]
    InfeasibleRepresentation { a: usize, b: usize, x: usize, y: usize, value: f64 },

    #[error("resource limit: {what} requires {count} items, cap is {cap}")]
    ResourceLimit { what: String, count: u128, cap: u128 },

    /// A solver did not reach optimality.
    #[error("solver did not converge: {0}")]
    Solver(String),

    /// A result that valid inputs can never produce.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("reconstruction mismatch: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Mismatch { residual: f64, tolerance: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
