//! Error type shared by all solver components.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A user-supplied coefficient or datum evaluated to NaN/Inf.
    #[error("non-finite value from {what} at ({x}, {y})")]
    NumericInput { what: &'static str, x: f64, y: f64 },

    /// A coefficient violated a sign requirement (e.g. negative diffusion).
    #[error("coefficient sign violation: {what} = {value} at ({x}, {y})")]
    CoefficientSign {
        what: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("iterative solver did not converge: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    NonConvergence {
        residual: f64,
        target: f64,
        iterations: usize,
    },

    /// The matrix handed to an SPD solver turned out not to be SPD.
    #[error("matrix property violation: {0}")]
    MatrixProperty(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// A factorization handle was used after its system was rebuilt.
    #[error("stale factorization handle: {0}")]
    StaleHandle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
