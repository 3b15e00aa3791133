use thiserror::Error;

/// Errors produced by dataset construction, solvers, and downstream analyses.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or unusable input data (bad dimensions, non-finite values,
    /// malformed CSV, response constraint violations, ...).
    #[error("{0}")]
    Data(String),

    /// Coordinate descent failed to converge at one point of the path.
    #[error(
        "solver did not converge at lambda index {lambda_index} (lambda = {lambda:.6e}): \
         KKT residual {residual:.3e} after {iterations} sweeps"
    )]
    NoConvergence {
        lambda_index: usize,
        lambda: f64,
        residual: f64,
        iterations: usize,
    },

    /// Numerical breakdown outside the solver loop (degenerate weights,
    /// singular information matrix, ...).
    #[error("{0}")]
    Numerical(String),
}

impl Error {
    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for input/data problems, false for numerical failures.
    pub fn is_data(&self) -> bool {
        matches!(self, Error::Data(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
