//! Reusable factorization of the generalized Stokes saddle-point system.

use crate::assembly::StokesSystem;
use crate::error::{Error, Result};

use super::ldl::LdlFactorization;

/// Opaque, reusable factorization handle for a `StokesSystem`. Valid until
/// the system is reassembled (mesh, step size or Reynolds number change).
pub struct SaddleFactorization {
    ldl: LdlFactorization,
    system_id: u64,
    n_vel: usize,
    n_pres: usize,
}

/// Factor the eliminated saddle matrix once; subsequent solves reuse the
/// factor across all time steps.
pub fn factorize_saddle(sys: &StokesSystem) -> Result<SaddleFactorization> {
    let n = sys.saddle.n_rows;
    let ldl = LdlFactorization::new(
        sys.saddle.clone(),
        &sys.row_coords,
        &sys.pivot_signs,
        &[n - 1], // the pressure-mean multiplier row stays last
    )?;
    Ok(SaddleFactorization {
        ldl,
        system_id: sys.id,
        n_vel: sys.n_vel,
        n_pres: sys.n_pres,
    })
}

impl SaddleFactorization {
    pub fn nnz_factor(&self) -> usize {
        self.ldl.nnz_factor()
    }

    pub fn regularized_pivots(&self) -> usize {
        self.ldl.regularized_pivots
    }

    fn check(&self, sys: &StokesSystem) -> Result<()> {
        if sys.id != self.system_id {
            return Err(Error::StaleHandle(format!(
                "factorization was built for system {} but got system {}",
                self.system_id, sys.id
            )));
        }
        Ok(())
    }

    /// Solve one diffusion-correction step: `f_vel` is the full-length
    /// velocity load and `u_boundary` the Dirichlet velocity values at the
    /// new time level. Returns (velocity with boundary data, pressure).
    pub fn solve(
        &self,
        sys: &StokesSystem,
        f_vel: &[f64],
        u_boundary: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(sys)?;
        if f_vel.len() != self.n_vel || u_boundary.len() != self.n_vel {
            return Err(Error::invalid(format!(
                "saddle rhs length {} does not match system velocity count {}",
                f_vel.len(),
                self.n_vel
            )));
        }
        let rhs = sys.assemble_rhs(f_vel, u_boundary);
        let x = self.ldl.solve(&rhs)?;
        Ok(sys.split_solution(&x, u_boundary))
    }

    /// Raw saddle solve on an already-assembled reduced right-hand side.
    pub fn solve_reduced(&self, sys: &StokesSystem, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check(sys)?;
        self.ldl.solve(rhs)
    }

    pub fn n_pres(&self) -> usize {
        self.n_pres
    }
}
