//! Time integrators for the scalar convection-dominated transport problem:
//! a single-step scheme (explicit transport predictor + implicit
//! diffusion-reaction correction) and its multistep variant, which runs the
//! explicit substep `m` times with local step dt/m per correction to
//! enlarge the stability region.

use std::collections::HashMap;
use std::sync::Arc;

use crate::assembly::{
    cd_convection_rhs, cd_diffusion_system, eliminate_spd, load_vector, lump_rows, mass_matrix,
    EliminatedSpd, MassOp,
};
use crate::error::Result;
use crate::solver::{Preconditioner, SolverConfig, SpdSolver};
use crate::space::{classify_inflow, interpolate, FeSpace, InflowSet};
use crate::sparse::{norm_inf, CsrMatrix};

/// States with an infinity norm beyond this are declared diverged; far
/// above every manufactured solution in the registry (max ~ e^{2 pi}).
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

pub type ScalarField = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type VectorField = Box<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Scalar transport problem data: coefficients, split source F = f + g
/// (with f = 0 by default so the predictor needs no source divergence),
/// boundary/initial data and an optional exact solution.
pub struct CdProblem {
    pub b: VectorField,
    pub div_b: ScalarField,
    pub eps: f64,
    pub c: ScalarField,
    /// Transport-step source component; `None` means identically zero.
    pub f: Option<ScalarField>,
    /// Correction-step source component.
    pub g: ScalarField,
    pub u_b: ScalarField,
    pub u_0: ScalarField,
    pub exact: Option<ScalarField>,
    /// b (hence the inflow set) does not depend on t.
    pub b_time_independent: bool,
    /// eps and c do not depend on t, so the correction matrix is reusable.
    pub coeffs_time_independent: bool,
}

/// Uniform (or final-step-shortened) time grid with multistep index m.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
    /// Multistep index: number of transport substeps per correction.
    pub m: usize,
    dt_nominal: f64,
    uniform: bool,
}

impl TimeGrid {
    /// Grid with exactly `n_steps` uniform steps: n_steps * dt = t_final.
    pub fn uniform(t_final: f64, n_steps: usize, m: usize) -> Self {
        assert!(t_final > 0.0 && n_steps > 0 && m >= 1);
        TimeGrid {
            t_final,
            n_steps,
            m,
            dt_nominal: t_final / n_steps as f64,
            uniform: true,
        }
    }

    /// Grid with the requested global step; the final step is shortened to
    /// land exactly on `t_final` when dt does not divide it.
    pub fn with_dt(t_final: f64, dt: f64, m: usize) -> Self {
        assert!(t_final > 0.0 && dt > 0.0 && m >= 1);
        let ratio = t_final / dt;
        let n_exact = ratio.round();
        if (ratio - n_exact).abs() < 1e-9 && n_exact >= 1.0 {
            return TimeGrid::uniform(t_final, n_exact as usize, m);
        }
        TimeGrid {
            t_final,
            n_steps: ratio.ceil() as usize,
            m,
            dt_nominal: dt,
            uniform: false,
        }
    }

    /// Nominal global step size.
    pub fn dt(&self) -> f64 {
        self.dt_nominal
    }

    /// Local (substep) size of the nominal step.
    pub fn local_dt(&self) -> f64 {
        self.dt_nominal / self.m as f64
    }

    /// Time level after `step` completed global steps, exact at t_final.
    pub fn time(&self, step: usize) -> f64 {
        if self.uniform {
            self.t_final * step as f64 / self.n_steps as f64
        } else {
            (step as f64 * self.dt_nominal).min(self.t_final)
        }
    }

    /// Size of global step `n` (0-based). Bitwise-constant across steps so
    /// operator caches keyed on dt stay warm; only the shortened final step
    /// of a non-divisor grid differs.
    pub fn step_dt(&self, n: usize) -> f64 {
        if !self.uniform && n + 1 == self.n_steps {
            self.t_final - self.time(n)
        } else {
            self.dt_nominal
        }
    }

    /// Time level after substep `i` of global step `n` (i in 0..=m).
    pub fn substep_time(&self, n: usize, i: usize, step_dt: f64) -> f64 {
        if self.uniform {
            self.t_final * (n * self.m + i) as f64 / (self.n_steps * self.m) as f64
        } else {
            self.time(n) + i as f64 * step_dt / self.m as f64
        }
    }
}

/// Result of one global step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub diverged: bool,
    pub max_abs: f64,
}

impl StepOutcome {
    fn from_state(state: Vec<f64>) -> Self {
        let max_abs = norm_inf(&state);
        let diverged = !max_abs.is_finite() || max_abs > DIVERGENCE_THRESHOLD;
        StepOutcome {
            state,
            diverged,
            max_abs,
        }
    }
}

/// Per-step scalar log entry of a run.
#[derive(Debug, Clone, Copy)]
pub struct StepLog {
    pub time: f64,
    pub max_abs: f64,
}

/// Full run output: log, optional stored states, final outcome.
pub struct CdRun {
    pub log: Vec<StepLog>,
    pub states: Option<Vec<Vec<f64>>>,
    pub outcome: StepOutcome,
}

struct MassSystem {
    eliminated: EliminatedSpd,
    solver: SpdSolver,
    inflow_nodes: Vec<usize>,
}

/// Stepper with all reusable operators prebuilt: consistent (and optionally
/// lumped) mass, the eliminated transport mass systems per inflow set, and
/// the diffusion-correction system with its incomplete-Cholesky CG solver.
pub struct CdSolver<'p> {
    pub problem: &'p CdProblem,
    pub grid: TimeGrid,
    pub space: Arc<FeSpace>,
    pub lumped: bool,
    pub solver_cfg: SolverConfig,
    mass: CsrMatrix,
    lumped_diag: Option<Vec<f64>>,
    inflow_cache: Option<InflowSet>,
    mass_system: Option<MassSystem>,
    /// Correction systems keyed by dt bits (rebuilt if coefficients are
    /// time-dependent).
    correction_cache: HashMap<u64, (EliminatedSpd, SpdSolver)>,
    boundary_nodes: Vec<usize>,
}

impl<'p> CdSolver<'p> {
    pub fn new(
        problem: &'p CdProblem,
        grid: TimeGrid,
        space: Arc<FeSpace>,
        lumped: bool,
        solver_cfg: SolverConfig,
    ) -> Result<Self> {
        assert_eq!(space.components, 1, "scalar transport needs a scalar space");
        let mass = mass_matrix(&space, false);
        let lumped_diag = lumped.then(|| lump_rows(&mass));
        let boundary_nodes = space.all_boundary_nodes();
        Ok(CdSolver {
            problem,
            grid,
            space,
            lumped,
            solver_cfg,
            mass,
            lumped_diag,
            inflow_cache: None,
            mass_system: None,
            correction_cache: HashMap::new(),
            boundary_nodes,
        })
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    fn inflow_at(&mut self, t: f64) -> InflowSet {
        if self.problem.b_time_independent {
            if let Some(cached) = &self.inflow_cache {
                let mut set = cached.clone();
                set.time = t;
                return set;
            }
        }
        let set = classify_inflow(&self.space, &self.problem.b, t);
        if self.problem.b_time_independent {
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

    /// One explicit transport substep from `t_lo` over `dt`: assemble the
    /// predictor right-hand side, invert the Gram pairing (or divide by the
    /// lumped diagonal), then inject boundary data on the inflow set at the
    /// substep end time.
    pub fn convection_substep(&mut self, state: &[f64], t_lo: f64, dt: f64) -> Result<Vec<f64>> {
        let t_end = t_lo + dt;
        let inflow = self.inflow_at(t_end);
        let mass_op = match &self.lumped_diag {
            Some(d) => MassOp::Lumped(d),
            None => MassOp::Consistent(&self.mass),
        };
        let p = self.problem;
        let f_fn: Option<&dyn Fn(f64, f64, f64) -> f64> =
            p.f.as_deref().map(|f| f as &dyn Fn(f64, f64, f64) -> f64);
        let rhs = cd_convection_rhs(
            &self.space,
            &mass_op,
            state,
            &*p.b,
            &*p.div_b,
            f_fn,
            t_lo,
            dt,
            &inflow,
        )?;

        let mut bvals = vec![0.0; self.space.n_dofs()];
        for &node in &inflow.nodes {
            let [x, y] = self.space.dof_coords[node];
            bvals[node] = (p.u_b)(x, y, t_end);
        }

        if let Some(diag) = &self.lumped_diag {
            let mut u: Vec<f64> = rhs.iter().zip(diag).map(|(r, d)| r / d).collect();
            for &node in &inflow.nodes {
                u[node] = bvals[node];
            }
            Ok(u)
        } else {
            let ms = self.mass_solver_for(&inflow)?;
            let reduced = ms.eliminated.reduce_rhs(&rhs, &bvals);
            let x = ms.solver.solve(&reduced)?;
            Ok(ms.eliminated.scatter(&x, &bvals))
        }
    }

    fn correction_system(&mut self, dt: f64, t_new: f64) -> Result<&(EliminatedSpd, SpdSolver)> {
        let key = dt.to_bits();
        let reusable = self.problem.coeffs_time_independent;
        if !reusable {
            self.correction_cache.clear();
        }
        if !self.correction_cache.contains_key(&key) || !reusable {
            let eps = self.problem.eps;
            let eps_fn = move |_: f64, _: f64, _: f64| eps;
            let a = cd_diffusion_system(&self.space, dt, &eps_fn, &*self.problem.c, t_new)?;
            let boundary: Vec<usize> = self.boundary_nodes.clone();
            let eliminated = eliminate_spd(&a, boundary);
            let solver = SpdSolver::new(eliminated.a_ii.clone(), self.solver_cfg)?;
            self.correction_cache.insert(key, (eliminated, solver));
        }
        Ok(&self.correction_cache[&key])
    }

    /// Implicit diffusion-reaction correction: solve
    /// (M + dt (diffusion + reaction at t_new)) u = M u* + dt (g^new, v)
    /// with full Dirichlet data at the new time level.
    pub fn diffusion_correction(&mut self, u_star: &[f64], t_new: f64, dt: f64) -> Result<Vec<f64>> {
        let mut rhs = self.mass.mul_vec(u_star);
        let load = load_vector(&self.space, &*self.problem.g, t_new);
        for (r, l) in rhs.iter_mut().zip(&load) {
            *r += dt * l;
        }
        let p_ub = &self.problem.u_b;
        let mut bvals = vec![0.0; self.space.n_dofs()];
        for &node in &self.boundary_nodes {
            let [x, y] = self.space.dof_coords[node];
            bvals[node] = p_ub(x, y, t_new);
        }
        let (eliminated, solver) = self.correction_system(dt, t_new)?;
        let reduced = eliminated.reduce_rhs(&rhs, &bvals);
        let x = solver.solve(&reduced)?;
        Ok(eliminated.scatter(&x, &bvals))
    }

    /// One full global step from `t_n`: `m` transport substeps with the
    /// local step, then the implicit diffusion-reaction correction with
    /// full Dirichlet data at the new time level.
    pub fn step(&mut self, state: &[f64], step_index: usize) -> Result<StepOutcome> {
        let dt = self.grid.step_dt(step_index);
        let m = self.grid.m;
        let local_dt = dt / m as f64;

        let mut u_star = state.to_vec();
        for i in 1..=m {
            let t_lo = self.grid.substep_time(step_index, i - 1, dt);
            u_star = self.convection_substep(&u_star, t_lo, local_dt)?;
            let max_abs = norm_inf(&u_star);
            if !max_abs.is_finite() || max_abs > DIVERGENCE_THRESHOLD {
                return Ok(StepOutcome {
                    state: u_star,
                    diverged: true,
                    max_abs,
                });
            }
        }

        let t_new = self.grid.substep_time(step_index, m, dt);
        let state = self.diffusion_correction(&u_star, t_new, dt)?;
        Ok(StepOutcome::from_state(state))
    }

    /// Run from the interpolated initial datum to the final time, stopping
    /// early on divergence.
    pub fn run(&mut self, keep_states: bool) -> Result<CdRun> {
        let mut state = interpolate(&self.space, &self.problem.u_0, 0.0)?;
        let mut log = vec![StepLog {
            time: 0.0,
            max_abs: norm_inf(&state),
        }];
        let mut states = keep_states.then(|| vec![state.clone()]);

        for n in 0..self.grid.n_steps {
            let outcome = self.step(&state, n)?;
            let t = self.grid.time(n + 1);
            log.push(StepLog {
                time: t,
                max_abs: outcome.max_abs,
            });
            if let Some(s) = &mut states {
                s.push(outcome.state.clone());
            }
            if outcome.diverged {
                return Ok(CdRun {
                    log,
                    states,
                    outcome,
                });
            }
            state = outcome.state;
        }
        let outcome = StepOutcome::from_state(state);
        Ok(CdRun {
            log,
            states,
            outcome,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_unit_square;
    use crate::space::build_space;

    fn zero_problem() -> CdProblem {
        CdProblem {
            b: Box::new(|_, _, _| [1.0, -1.0]),
            div_b: Box::new(|_, _, _| 0.0),
            eps: 1e-8,
            c: Box::new(|_, _, _| 1.0),
            f: None,
            g: Box::new(|_, _, _| 0.0),
            u_b: Box::new(|_, _, _| 0.0),
            u_0: Box::new(|_, _, _| 0.0),
            exact: None,
            b_time_independent: true,
            coeffs_time_independent: true,
        }
    }

    fn space(n: usize) -> Arc<FeSpace> {
        let mesh = Arc::new(build_uniform_unit_square(n).unwrap());
        Arc::new(build_space(mesh, 1, 1).unwrap())
    }

    #[test]
    fn zero_data_fixed_point() {
        let p = zero_problem();
        let grid = TimeGrid::uniform(1.0, 5, 2);
        let mut solver = CdSolver::new(&p, grid, space(4), false, SolverConfig::default()).unwrap();
        let run = solver.run(false).unwrap();
        assert!(!run.outcome.diverged);
        assert_eq!(run.outcome.max_abs, 0.0);
    }

    #[test]
    fn zero_steps_returns_interpolant() {
        let p = CdProblem {
            u_0: Box::new(|x, y, _| x + y),
            ..zero_problem()
        };
        // One stored state (the initial one) on a run over zero steps is the
        // interpolant itself; model with keep_states over a 1-step grid.
        let grid = TimeGrid::uniform(1.0, 1, 1);
        let mut solver = CdSolver::new(&p, grid, space(2), false, SolverConfig::default()).unwrap();
        let run = solver.run(true).unwrap();
        let init = &run.states.as_ref().unwrap()[0];
        for (v, &[x, y]) in init.iter().zip(&solver.space.dof_coords) {
            assert!((v - (x + y)).abs() < 1e-15);
        }
    }

    #[test]
    fn substep_identity_without_convection() {
        let p = CdProblem {
            b: Box::new(|_, _, _| [0.0, 0.0]),
            ..zero_problem()
        };
        let grid = TimeGrid::uniform(1.0, 1, 1);
        let mut solver = CdSolver::new(&p, grid, space(3), false, SolverConfig::default()).unwrap();
        let state = interpolate(&solver.space, |x, y, _| (3.0 * x).sin() + y, 0.0).unwrap();
        let out = solver.convection_substep(&state, 0.0, 0.25).unwrap();
        for (a, b) in out.iter().zip(&state) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn substep_identity_without_convection_lumped() {
        let p = CdProblem {
            b: Box::new(|_, _, _| [0.0, 0.0]),
            ..zero_problem()
        };
        let grid = TimeGrid::uniform(1.0, 1, 1);
        let mut solver = CdSolver::new(&p, grid, space(3), true, SolverConfig::default()).unwrap();
        let state = interpolate(&solver.space, |x, y, _| x * x + 0.5 * y, 0.0).unwrap();
        let out = solver.convection_substep(&state, 0.0, 0.25).unwrap();
        for (a, b) in out.iter().zip(&state) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_time_bookkeeping_is_exact() {
        let g = TimeGrid::uniform(1.0, 640, 64);
        assert_eq!(g.time(640), 1.0);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.substep_time(639, 64, g.step_dt(639)), 1.0);
        let g2 = TimeGrid::with_dt(1.0, 0.3, 4);
        assert_eq!(g2.n_steps, 4);
        assert_eq!(g2.time(4), 1.0);
        assert!((g2.step_dt(3) - 0.1).abs() < 1e-12);
        // Exact divisors collapse to the uniform grid.
        let g3 = TimeGrid::with_dt(1.0, 0.1 / 64.0, 1);
        assert_eq!(g3.n_steps, 640);
        assert_eq!(g3.time(g3.n_steps), 1.0);
    }

    #[test]
    fn divergence_is_flagged_not_error() {
        // A violently unstable configuration: large dt, coarse mesh, m=1.
        let p = CdProblem {
            u_0: Box::new(|x, y, _| (6.28 * x).sin() * (6.28 * y).sin()),
            b: Box::new(|_, _, _| [40.0, -40.0]),
            ..zero_problem()
        };
        let grid = TimeGrid::uniform(1.0, 4, 1);
        let mut solver = CdSolver::new(&p, grid, space(16), false, SolverConfig::default()).unwrap();
        let run = solver.run(false).unwrap();
        assert!(run.outcome.diverged);
        assert!(run.log.len() <= grid.n_steps + 1);
    }
}
