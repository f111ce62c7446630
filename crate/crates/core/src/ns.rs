//! Time integrators for incompressible flow: explicit (multistep)
//! convection substeps followed by a generalized Stokes correction whose
//! matrix is assembled and factorized once, then reused every step.

use std::collections::HashMap;
use std::sync::Arc;

use crate::assembly::{
    eliminate_spd, load_vector_vector, mass_matrix, ns_convection_rhs, stokes_system,
    EliminatedSpd, StokesSystem,
};
use crate::cd::{StepLog, TimeGrid, DIVERGENCE_THRESHOLD};
use crate::error::Result;
use crate::solver::{factorize_saddle, Preconditioner, SaddleFactorization, SolverConfig, SpdSolver};
use crate::space::{classify_inflow, interpolate_vector, FeSpace, InflowSet};
use crate::sparse::{norm_inf, CsrMatrix};

pub use crate::cd::{ScalarField, VectorField};

/// Incompressible flow problem data. The body force g is the full source
/// (the transport component f is identically zero, which keeps the
/// predictor free of source derivatives).
pub struct NsProblem {
    pub re: f64,
    pub g: VectorField,
    pub u_b: VectorField,
    pub u_0: VectorField,
    pub exact_velocity: Option<VectorField>,
    pub exact_pressure: Option<ScalarField>,
    /// u_b (hence the inflow set) does not depend on t.
    pub ub_time_independent: bool,
}

/// Discrete flow state: quadratic velocity, linear pressure.
#[derive(Debug, Clone)]
pub struct NsState {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct NsStepOutcome {
    pub state: NsState,
    pub diverged: bool,
    pub max_abs: f64,
}

pub struct NsRun {
    pub log: Vec<StepLog>,
    pub states: Option<Vec<NsState>>,
    pub outcome: NsStepOutcome,
}

struct MassSystem {
    eliminated: EliminatedSpd,
    solver: SpdSolver,
    inflow_nodes: Vec<usize>,
}

/// Flow stepper holding the reusable operators: the vector mass matrix and
/// its transport solver, and one factorized Stokes correction per distinct
/// step size (one for uniform grids, at most two when the final step is
/// shortened).
pub struct NsSolver<'p> {
    pub problem: &'p NsProblem,
    pub grid: TimeGrid,
    pub vel_space: Arc<FeSpace>,
    pub pres_space: Arc<FeSpace>,
    pub solver_cfg: SolverConfig,
    mass: CsrMatrix,
    inflow_cache: Option<InflowSet>,
    mass_system: Option<MassSystem>,
    stokes_cache: HashMap<u64, (StokesSystem, SaddleFactorization)>,
}

impl<'p> NsSolver<'p> {
    pub fn new(
        problem: &'p NsProblem,
        grid: TimeGrid,
        vel_space: Arc<FeSpace>,
        pres_space: Arc<FeSpace>,
        solver_cfg: SolverConfig,
    ) -> Result<Self> {
        let mass = mass_matrix(&vel_space, false);
        let mut solver = NsSolver {
            problem,
            grid,
            vel_space,
            pres_space,
            solver_cfg,
            mass,
            inflow_cache: None,
            mass_system: None,
            stokes_cache: HashMap::new(),
        };
        // Build the nominal-step factorization up front.
        solver.stokes_for(grid.dt())?;
        Ok(solver)
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stokes(&self) -> &StokesSystem {
        &self.stokes_cache[&self.grid.dt().to_bits()].0
    }

    fn stokes_for(&mut self, dt: f64) -> Result<&(StokesSystem, SaddleFactorization)> {
        let key = dt.to_bits();
        if !self.stokes_cache.contains_key(&key) {
            let sys = stokes_system(&self.vel_space, &self.pres_space, dt, self.problem.re)?;
            let fac = factorize_saddle(&sys)?;
            self.stokes_cache.insert(key, (sys, fac));
        }
        Ok(&self.stokes_cache[&key])
    }

    fn inflow_at(&mut self, t: f64) -> InflowSet {
        if self.problem.ub_time_independent {
            if let Some(cached) = &self.inflow_cache {
                let mut set = cached.clone();
                set.time = t;
                return set;
            }
        }
        let set = classify_inflow(&self.vel_space, &self.problem.u_b, t);
        if self.problem.ub_time_independent {
            self.inflow_cache = Some(set.clone());
        }
        set
    }

    fn mass_solver_for(&mut self, inflow: &InflowSet) -> Result<&MassSystem> {
        let stale = match &self.mass_system {
            Some(ms) => ms.inflow_nodes != inflow.nodes,
            None => true,
        };
        if stale {
            let eliminated = eliminate_spd(&self.mass, inflow.dof_indices.clone());
            let solver = SpdSolver::new(
                eliminated.a_ii.clone(),
                SolverConfig {
                    preconditioner: Preconditioner::Jacobi,
                    ..self.solver_cfg
                },
            )?;
            self.mass_system = Some(MassSystem {
                eliminated,
                solver,
                inflow_nodes: inflow.nodes.clone(),
            });
        }
        Ok(self.mass_system.as_ref().unwrap())
    }

    /// One explicit transport substep over `dt` from `t_lo`: half-step
    /// predictor right-hand side, Gram solve, then Dirichlet injection on
    /// the inflow set of the boundary datum at the substep end time.
    pub fn convection_substep(&mut self, velocity: &[f64], t_lo: f64, dt: f64) -> Result<Vec<f64>> {
        let t_end = t_lo + dt;
        let inflow = self.inflow_at(t_end);
        let p = self.problem;
        let rhs = ns_convection_rhs(&self.vel_space, &self.mass, velocity, &*p.u_b, t_lo, dt)?;

        let mut bvals = vec![0.0; self.vel_space.n_dofs()];
        for &node in &inflow.nodes {
            let [x, y] = self.vel_space.dof_coords[node];
            let v = (p.u_b)(x, y, t_end);
            bvals[2 * node] = v[0];
            bvals[2 * node + 1] = v[1];
        }
        let ms = self.mass_solver_for(&inflow)?;
        let reduced = ms.eliminated.reduce_rhs(&rhs, &bvals);
        let x = ms.solver.solve(&reduced)?;
        Ok(ms.eliminated.scatter(&x, &bvals))
    }

    /// Generalized Stokes correction at the new time level: solve with the
    /// reused factorization against dt^-1 (M u*, v) + (g^new, v) and full
    /// Dirichlet velocity data.
    pub fn stokes_correction(
        &mut self,
        u_star: &[f64],
        t_new: f64,
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut f_vel = self.mass.mul_vec(u_star);
        let dt_inv = 1.0 / dt;
        for v in f_vel.iter_mut() {
            *v *= dt_inv;
        }
        let load = load_vector_vector(&self.vel_space, &*self.problem.g, t_new);
        for (f, l) in f_vel.iter_mut().zip(&load) {
            *f += l;
        }
        let mut u_boundary = vec![0.0; self.vel_space.n_dofs()];
        for &node in &self.vel_space.all_boundary_nodes() {
            let [x, y] = self.vel_space.dof_coords[node];
            let v = (self.problem.u_b)(x, y, t_new);
            u_boundary[2 * node] = v[0];
            u_boundary[2 * node + 1] = v[1];
        }
        let (sys, fac) = self.stokes_for(dt)?;
        fac.solve(sys, &f_vel, &u_boundary)
    }

    /// One full global step: `m` transport substeps then the Stokes
    /// correction.
    pub fn step(&mut self, state: &NsState, step_index: usize) -> Result<NsStepOutcome> {
        let dt = self.grid.step_dt(step_index);
        let m = self.grid.m;
        let local_dt = dt / m as f64;

        let mut u_star = state.velocity.clone();
        for i in 1..=m {
            let t_lo = self.grid.substep_time(step_index, i - 1, dt);
            u_star = self.convection_substep(&u_star, t_lo, local_dt)?;
            let max_abs = norm_inf(&u_star);
            if !max_abs.is_finite() || max_abs > DIVERGENCE_THRESHOLD {
                return Ok(NsStepOutcome {
                    state: NsState {
                        velocity: u_star,
                        pressure: state.pressure.clone(),
                        time: t_lo + local_dt,
                    },
                    diverged: true,
                    max_abs,
                });
            }
        }

        let t_new = self.grid.substep_time(step_index, m, dt);
        let (velocity, pressure) = self.stokes_correction(&u_star, t_new, dt)?;
        let max_abs = norm_inf(&velocity);
        let diverged = !max_abs.is_finite() || max_abs > DIVERGENCE_THRESHOLD;
        Ok(NsStepOutcome {
            state: NsState {
                velocity,
                pressure,
                time: t_new,
            },
            diverged,
            max_abs,
        })
    }

    pub fn initial_state(&self) -> Result<NsState> {
        Ok(NsState {
            velocity: interpolate_vector(&self.vel_space, &self.problem.u_0, 0.0)?,
            pressure: vec![0.0; self.pres_space.n_dofs()],
            time: 0.0,
        })
    }

    /// Run all steps of the grid, stopping early on divergence.
    pub fn run(&mut self, keep_states: bool) -> Result<NsRun> {
        let mut state = self.initial_state()?;
        let mut log = vec![StepLog {
            time: 0.0,
            max_abs: norm_inf(&state.velocity),
        }];
        let mut states = keep_states.then(|| vec![state.clone()]);

        for n in 0..self.grid.n_steps {
            let outcome = self.step(&state, n)?;
            log.push(StepLog {
                time: outcome.state.time,
                max_abs: outcome.max_abs,
            });
            if let Some(s) = &mut states {
                s.push(outcome.state.clone());
            }
            if outcome.diverged {
                return Ok(NsRun {
                    log,
                    states,
                    outcome,
                });
            }
            state = outcome.state;
        }
        let max_abs = norm_inf(&state.velocity);
        Ok(NsRun {
            log,
            states,
            outcome: NsStepOutcome {
                state,
                diverged: false,
                max_abs,
            },
        })
    }

    /// Kinetic energy 0.5 (u, u) of a velocity field.
    pub fn kinetic_energy(&self, velocity: &[f64]) -> f64 {
        0.5 * crate::sparse::dot(velocity, &self.mass.mul_vec(velocity))
    }

    /// Infinity norm of the discrete divergence residual (div u, psi_q).
    pub fn divergence_residual_norm(&self, velocity: &[f64]) -> f64 {
        norm_inf(&self.stokes().divergence_residual(velocity))
    }

    /// Weighted pressure mean, integral of p_h over the domain.
    pub fn pressure_mean(&self, pressure: &[f64]) -> f64 {
        pressure
            .iter()
            .zip(&self.stokes().mean_row)
            .map(|(p, e)| p * e)
            .sum()
    }

    /// L2 norm of the difference of two velocity fields (mass-weighted).
    pub fn velocity_l2_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        crate::sparse::dot(&d, &self.mass.mul_vec(&d)).max(0.0).sqrt()
    }

    /// Mass-weighted L2 norm of a velocity field.
    pub fn velocity_l2(&self, v: &[f64]) -> f64 {
        crate::sparse::dot(v, &self.mass.mul_vec(v)).max(0.0).sqrt()
    }
}

/// Build the Taylor-Hood pair (quadratic velocity, linear pressure) on one
/// mesh.
pub fn taylor_hood_spaces(
    mesh: Arc<crate::mesh::TriangleMesh>,
) -> Result<(Arc<FeSpace>, Arc<FeSpace>)> {
    let vel = Arc::new(crate::space::build_space(mesh.clone(), 2, 2)?);
    let pres = Arc::new(crate::space::build_space(mesh, 1, 1)?);
    Ok((vel, pres))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_unit_square;
    use crate::problems;

    fn zero_problem(re: f64) -> NsProblem {
        NsProblem {
            re,
            g: Box::new(|_, _, _| [0.0, 0.0]),
            u_b: Box::new(|_, _, _| [0.0, 0.0]),
            u_0: Box::new(|_, _, _| [0.0, 0.0]),
            exact_velocity: None,
            exact_pressure: None,
            ub_time_independent: true,
        }
    }

    fn solver_on<'p>(p: &'p NsProblem, n: usize, grid: TimeGrid) -> NsSolver<'p> {
        let mesh = Arc::new(build_uniform_unit_square(n).unwrap());
        let (v, q) = taylor_hood_spaces(mesh).unwrap();
        NsSolver::new(p, grid, v, q, SolverConfig::default()).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = zero_problem(1000.0);
        let mut s = solver_on(&p, 2, TimeGrid::uniform(0.5, 5, 2));
        let run = s.run(false).unwrap();
        assert!(!run.outcome.diverged);
        assert_eq!(run.outcome.max_abs, 0.0);
        assert_eq!(norm_inf(&run.outcome.state.pressure), 0.0);
    }

    #[test]
    fn substep_zero_velocity_zero_boundary() {
        let p = zero_problem(100.0);
        let mut s = solver_on(&p, 2, TimeGrid::uniform(1.0, 1, 1));
        let out = s
            .convection_substep(&vec![0.0; s.vel_space.n_dofs()], 0.0, 0.1)
            .unwrap();
        assert_eq!(norm_inf(&out), 0.0);
    }

    #[test]
    fn rigid_translation_is_convection_fixed_point() {
        let p = NsProblem {
            u_b: Box::new(|_, _, _| [1.0, 0.0]),
            u_0: Box::new(|_, _, _| [1.0, 0.0]),
            ..zero_problem(100.0)
        };
        let mesh = Arc::new(build_uniform_unit_square(3).unwrap());
        let (v, q) = taylor_hood_spaces(mesh).unwrap();
        let cfg = SolverConfig {
            rel_tol: 1e-13,
            ..Default::default()
        };
        let mut s = NsSolver::new(&p, TimeGrid::uniform(1.0, 1, 1), v, q, cfg).unwrap();
        let u = interpolate_vector(&s.vel_space, |_, _, _| [1.0, 0.0], 0.0).unwrap();
        let out = s.convection_substep(&u, 0.0, 0.1).unwrap();
        let bnodes = s.vel_space.all_boundary_nodes();
        for node in 0..s.vel_space.n_nodes() {
            if bnodes.contains(&node) {
                continue;
            }
            for c in 0..2 {
                let i = 2 * node + c;
                assert!((out[i] - u[i]).abs() < 1e-10, "dof {i}: {} vs {}", out[i], u[i]);
            }
        }
    }

    #[test]
    fn pressure_mean_zero_after_steps() {
        let p = problems::ns_example3(5000.0);
        let mut s = solver_on(&p, 3, TimeGrid::uniform(0.2, 2, 2));
        let run = s.run(false).unwrap();
        assert!(!run.outcome.diverged);
        let mean = s.pressure_mean(&run.outcome.state.pressure);
        assert!(mean.abs() < 1e-10, "pressure mean {mean}");
    }

    #[test]
    fn boundary_velocity_matches_datum_after_step() {
        let p = problems::ns_example4(5000.0);
        let mut s = solver_on(&p, 3, TimeGrid::uniform(0.5, 4, 2));
        let run = s.run(false).unwrap();
        let state = &run.outcome.state;
        for &node in &s.vel_space.all_boundary_nodes() {
            let [x, y] = s.vel_space.dof_coords[node];
            let expect = (p.u_b)(x, y, state.time);
            assert!((state.velocity[2 * node] - expect[0]).abs() < 1e-14);
            assert!((state.velocity[2 * node + 1] - expect[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_divergence_small_after_step() {
        let p = problems::ns_example3(5000.0);
        let mut s = solver_on(&p, 3, TimeGrid::uniform(0.1, 1, 1));
        let run = s.run(false).unwrap();
        let vel = &run.outcome.state.velocity;
        let res = s.divergence_residual_norm(vel);
        assert!(res <= 1e-8 * norm_inf(vel).max(1e-300), "residual {res}");
    }
}
