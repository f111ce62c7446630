//! Sparse linear solvers: preconditioned conjugate gradients for the SPD
//! subproblems, a reusable sparse LDL^T factorization for the time-invariant
//! saddle-point system, and a dense LU fallback used as a test oracle.

mod cg;
mod dense;
mod ic0;
mod ldl;
mod saddle;

pub use cg::{solve_spd, solve_spd_detailed, SolveInfo, SpdSolver};
pub use dense::DenseMatrix;
pub use ic0::Ic0;
pub use ldl::{nested_dissection, LdlFactorization};
pub use saddle::{factorize_saddle, SaddleFactorization};

/// Preconditioner selection for the CG solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    Jacobi,
    #[default]
    IncompleteCholesky,
}

/// Iterative solver settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Target residual reduction relative to the right-hand side norm.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Iteration cap; defaults to 10x the unknown count when `None`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iter: None,
            preconditioner: Preconditioner::IncompleteCholesky,
        }
    }
}

impl SolverConfig {
    pub fn with_preconditioner(pc: Preconditioner) -> Self {
        SolverConfig {
            preconditioner: pc,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(crate::error::Error::invalid("solver tolerances must be positive"));
        }
        if self.max_iter == Some(0) {
            return Err(crate::error::Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}
