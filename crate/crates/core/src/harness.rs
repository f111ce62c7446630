//! Study drivers: convergence tables in space and time, critical-time-step
//! searches for the multistep stabilization, and the lid-driven cavity
//! benchmark with streamfunction/vorticity post-processing.

use std::sync::Arc;

use crate::assembly::{
    diffusion_reaction_matrix, eliminate_spd, mass_matrix, volume_rule,
};
use crate::cd::{CdSolver, TimeGrid};
use crate::error::{Error, Result};
use crate::mesh::build_uniform_unit_square;
use crate::ns::{taylor_hood_spaces, NsSolver};
use crate::problems::{
    l2_error, l2_error_vector, l2_norm_exact, l2_norm_exact_vector, make_problem, Problem,
    ProblemId,
};
use crate::solver::{Preconditioner, SolverConfig, SpdSolver};
use crate::space::{build_space, FeSpace};

/// Refinement axis of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// Full description of a convergence study.
pub struct ConvergenceStudy {
    pub problem: ProblemId,
    pub axis: Axis,
    /// Mesh subdivisions per rung (space axis).
    pub mesh_ladder: Vec<usize>,
    /// Global step sizes per rung (time axis).
    pub dt_ladder: Vec<f64>,
    /// Mesh used on every rung of a time study.
    pub n_fixed: usize,
    /// Step size used on every rung of a space study.
    pub dt_fixed: f64,
    pub m: usize,
    pub t_final: f64,
    pub lumped: bool,
    pub rel_tol: f64,
    /// Report errors relative to the exact solution norm.
    pub relative_errors: bool,
}

impl ConvergenceStudy {
    pub fn time(problem: ProblemId, n: usize, m: usize, dt_ladder: Vec<f64>) -> Self {
        ConvergenceStudy {
            problem,
            axis: Axis::Time,
            mesh_ladder: Vec::new(),
            dt_ladder,
            n_fixed: n,
            dt_fixed: 0.0,
            m,
            t_final: 1.0,
            lumped: false,
            rel_tol: 1e-10,
            relative_errors: false,
        }
    }

    pub fn space(problem: ProblemId, dt: f64, m: usize, mesh_ladder: Vec<usize>) -> Self {
        ConvergenceStudy {
            problem,
            axis: Axis::Space,
            mesh_ladder,
            dt_ladder: Vec::new(),
            n_fixed: 0,
            dt_fixed: dt,
            m,
            t_final: 1.0,
            lumped: false,
            rel_tol: 1e-10,
            relative_errors: false,
        }
    }
}

/// One rung of a convergence table. A diverged run keeps `error = None`
/// (rendered as "divergence").
#[derive(Debug, Clone)]
pub struct ConvRow {
    /// h (space axis) or dt (time axis).
    pub resolution: f64,
    pub error: Option<f64>,
    pub pressure_error: Option<f64>,
    pub order: Option<f64>,
    pub pressure_order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub axis: Axis,
    pub rows: Vec<ConvRow>,
    pub problem: ProblemId,
    pub m: usize,
    pub fixed_resolution: f64,
    pub rel_tol: f64,
    pub relative_errors: bool,
}

/// Result of one complete run at a given mesh/grid.
pub struct SingleRun {
    pub diverged: bool,
    pub error: Option<f64>,
    pub error_rel: Option<f64>,
    pub pressure_error: Option<f64>,
    pub pressure_error_rel: Option<f64>,
    pub final_max_abs: f64,
}

/// Solve one problem instance to its final time and measure errors against
/// the exact solution (when one exists).
pub fn run_problem_once(
    id: ProblemId,
    n: usize,
    grid: TimeGrid,
    lumped: bool,
    rel_tol: f64,
) -> Result<SingleRun> {
    let cfg = SolverConfig {
        rel_tol,
        ..Default::default()
    };
    match make_problem(id) {
        Problem::Cd(problem) => {
            let mesh = Arc::new(build_uniform_unit_square(n)?);
            let space = Arc::new(build_space(mesh, 1, 1)?);
            let mut solver = CdSolver::new(&problem, grid, space.clone(), lumped, cfg)?;
            let run = solver.run(false)?;
            if run.outcome.diverged {
                return Ok(SingleRun {
                    diverged: true,
                    error: None,
                    error_rel: None,
                    pressure_error: None,
                    pressure_error_rel: None,
                    final_max_abs: run.outcome.max_abs,
                });
            }
            let t = grid.t_final;
            let (error, error_rel) = match &problem.exact {
                Some(exact) => {
                    let e = l2_error(&run.outcome.state, &space, &**exact, t);
                    let norm = l2_norm_exact(&space, &**exact, t);
                    (Some(e), Some(e / norm))
                }
                None => (None, None),
            };
            Ok(SingleRun {
                diverged: false,
                error,
                error_rel,
                pressure_error: None,
                pressure_error_rel: None,
                final_max_abs: run.outcome.max_abs,
            })
        }
        Problem::Ns(problem) => {
            let mesh = Arc::new(build_uniform_unit_square(n)?);
            let (vel_space, pres_space) = taylor_hood_spaces(mesh)?;
            let mut solver =
                NsSolver::new(&problem, grid, vel_space.clone(), pres_space.clone(), cfg)?;
            let run = solver.run(false)?;
            if run.outcome.diverged {
                return Ok(SingleRun {
                    diverged: true,
                    error: None,
                    error_rel: None,
                    pressure_error: None,
                    pressure_error_rel: None,
                    final_max_abs: run.outcome.max_abs,
                });
            }
            let t = grid.t_final;
            let state = &run.outcome.state;
            let (error, error_rel) = match &problem.exact_velocity {
                Some(exact) => {
                    let e = l2_error_vector(&state.velocity, &vel_space, &**exact, t);
                    let norm = l2_norm_exact_vector(&vel_space, &**exact, t);
                    (Some(e), Some(e / norm))
                }
                None => (None, None),
            };
            let (pressure_error, pressure_error_rel) = match &problem.exact_pressure {
                Some(exact) => {
                    let e = l2_error(&state.pressure, &pres_space, &**exact, t);
                    let norm = l2_norm_exact(&pres_space, &**exact, t);
                    (Some(e), Some(e / norm))
                }
                None => (None, None),
            };
            Ok(SingleRun {
                diverged: false,
                error,
                error_rel,
                pressure_error,
                pressure_error_rel,
                final_max_abs: run.outcome.max_abs,
            })
        }
    }
}

/// Run every rung of a study and attach observed orders.
pub fn run_convergence_study(study: &ConvergenceStudy) -> Result<ConvergenceReport> {
    let mut rows: Vec<ConvRow> = Vec::new();
    let rungs: Vec<(f64, usize, TimeGrid)> = match study.axis {
        Axis::Space => study
            .mesh_ladder
            .iter()
            .map(|&n| {
                (
                    1.0 / n as f64,
                    n,
                    TimeGrid::with_dt(study.t_final, study.dt_fixed, study.m),
                )
            })
            .collect(),
        Axis::Time => study
            .dt_ladder
            .iter()
            .map(|&dt| {
                (
                    dt,
                    study.n_fixed,
                    TimeGrid::with_dt(study.t_final, dt, study.m),
                )
            })
            .collect(),
    };
    if rungs.len() < 2 {
        return Err(Error::invalid("a study ladder needs at least two rungs"));
    }

    for (resolution, n, grid) in rungs {
        let run = run_problem_once(study.problem, n, grid, study.lumped, study.rel_tol)?;
        let (error, pressure_error) = if study.relative_errors {
            (run.error_rel, run.pressure_error_rel)
        } else {
            (run.error, run.pressure_error)
        };
        let order = match (rows.last().and_then(|r: &ConvRow| r.error), error) {
            (Some(prev), Some(cur)) if prev > 0.0 && cur > 0.0 => Some((prev / cur).log2()),
            _ => None,
        };
        let pressure_order = match (rows.last().and_then(|r| r.pressure_error), pressure_error) {
            (Some(prev), Some(cur)) if prev > 0.0 && cur > 0.0 => Some((prev / cur).log2()),
            _ => None,
        };
        rows.push(ConvRow {
            resolution,
            error,
            pressure_error,
            order,
            pressure_order,
        });
    }

    Ok(ConvergenceReport {
        axis: study.axis,
        rows,
        problem: study.problem,
        m: study.m,
        fixed_resolution: match study.axis {
            Axis::Space => study.dt_fixed,
            Axis::Time => 1.0 / study.n_fixed as f64,
        },
        rel_tol: study.rel_tol,
        relative_errors: study.relative_errors,
    })
}

/// Largest stable global step found for one multistep index.
#[derive(Debug, Clone)]
pub struct CriticalDtResult {
    pub m: usize,
    /// Largest converging step found.
    pub dt_crit: f64,
    /// (largest converging, smallest diverging).
    pub bracket: (f64, f64),
    pub probes_used: usize,
    /// The search hit its ceiling while still converging.
    pub unbounded: bool,
}

/// Search the largest global step for which the scheme still converges:
/// geometric bracketing (double on success, halve on failure) followed by
/// bisection to a 5% bracket width. "Converges" means the run completes
/// without blow-up AND its final error stays within 10x of a reference run
/// at `dt_seed / 4`.
pub fn find_critical_dt(
    id: ProblemId,
    n: usize,
    m: usize,
    dt_seed: f64,
    t_final: f64,
    probe_budget: usize,
) -> Result<CriticalDtResult> {
    find_critical_dt_with(
        |grid| run_problem_once(id, n, grid, false, 1e-10),
        m,
        dt_seed,
        t_final,
        probe_budget,
    )
}

/// Critical-step search over an arbitrary run driver (one probe per grid).
pub fn find_critical_dt_with<R>(
    mut runner: R,
    m: usize,
    dt_seed: f64,
    t_final: f64,
    probe_budget: usize,
) -> Result<CriticalDtResult>
where
    R: FnMut(TimeGrid) -> Result<SingleRun>,
{
    assert!(dt_seed > 0.0);
    let mut probes = 0usize;

    let reference = runner(TimeGrid::with_dt(t_final, dt_seed / 4.0, m))?;
    probes += 1;
    let ref_error = match (reference.diverged, reference.error) {
        (false, Some(e)) => e,
        _ => {
            return Err(Error::invalid(
                "reference run at dt_seed/4 diverged; pick a smaller seed",
            ))
        }
    };

    let mut converges = |dt: f64, probes: &mut usize| -> Result<bool> {
        *probes += 1;
        let run = runner(TimeGrid::with_dt(t_final, dt, m))?;
        Ok(!run.diverged && run.error.is_some_and(|e| e.is_finite() && e <= 10.0 * ref_error))
    };

    // The ceiling: one global step over the whole interval.
    let dt_max = t_final;
    let seed_ok = converges(dt_seed.min(dt_max), &mut probes)?;
    let (mut lo, mut hi);
    if seed_ok {
        lo = dt_seed.min(dt_max);
        loop {
            if lo >= dt_max {
                return Ok(CriticalDtResult {
                    m,
                    dt_crit: dt_max,
                    bracket: (dt_max, dt_max),
                    probes_used: probes,
                    unbounded: true,
                });
            }
            let cand = (2.0 * lo).min(dt_max);
            if probes >= probe_budget {
                return Ok(CriticalDtResult {
                    m,
                    dt_crit: lo,
                    bracket: (lo, cand),
                    probes_used: probes,
                    unbounded: false,
                });
            }
            if converges(cand, &mut probes)? {
                lo = cand;
            } else {
                hi = cand;
                break;
            }
        }
    } else {
        hi = dt_seed;
        loop {
            let cand = hi / 2.0;
            if probes >= probe_budget || cand < 1e-9 * t_final {
                return Err(Error::invalid(
                    "no converging step found within the probe budget",
                ));
            }
            if converges(cand, &mut probes)? {
                lo = cand;
                break;
            }
            hi = cand;
        }
    }

    while hi - lo > 0.05 * lo && probes < probe_budget {
        let mid = 0.5 * (lo + hi);
        if converges(mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    Ok(CriticalDtResult {
        m,
        dt_crit: lo,
        bracket: (lo, hi),
        probes_used: probes,
        unbounded: false,
    })
}

/// A streamfunction extremum and its node location.
#[derive(Debug, Clone)]
pub struct Vortex {
    pub label: &'static str,
    pub psi: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone)]
pub struct CavityReport {
    pub re: f64,
    pub n: usize,
    pub dt: f64,
    pub m: usize,
    /// Global streamfunction minimum (the primary vortex).
    pub primary: Vortex,
    /// Corner vortices: maxima in BL/BR/top-left windows, minima in the
    /// second-level corner windows.
    pub secondary: Vec<Vortex>,
    /// u_x along the vertical centerline x = 0.5: (y, u_x).
    pub u_centerline: Vec<(f64, f64)>,
    /// u_y along the horizontal centerline y = 0.5: (x, u_y).
    pub v_centerline: Vec<(f64, f64)>,
    /// Vorticity along x = 0.5: (y, omega).
    pub vorticity_x: Vec<(f64, f64)>,
    /// Vorticity along y = 0.5: (x, omega).
    pub vorticity_y: Vec<(f64, f64)>,
    pub steps: usize,
    pub steady: bool,
    pub final_increment: f64,
    /// Streamfunction coefficients (linear space) for external plotting.
    pub psi: Vec<f64>,
}

/// Load vector (curl u_h, phi_i) on the linear space: the right-hand side
/// of the vorticity projection.
fn curl_load(vel_space: &FeSpace, p1_space: &FeSpace, velocity: &[f64]) -> Vec<f64> {
    let rule = volume_rule(vel_space);
    let mut out = vec![0.0; p1_space.n_dofs()];
    for k in 0..vel_space.mesh.n_triangles() {
        let vnodes = vel_space.cell_nodes(k);
        let pnodes = p1_space.cell_nodes(k);
        let geom = vel_space.geom(k);
        let scale = 2.0 * geom.area;
        for (q, &l) in rule.points.iter().enumerate() {
            let g_ref = crate::space::grad_p2_ref(l);
            let mut curl = 0.0;
            for i in 0..6 {
                let g = geom.grad(g_ref[i]);
                // du2/dx - du1/dy
                curl += velocity[2 * vnodes[i] + 1] * g[0] - velocity[2 * vnodes[i]] * g[1];
            }
            let sp = crate::space::shape_p1(l);
            let w = scale * rule.weights[q];
            for (i, &spv) in sp.iter().enumerate() {
                out[pnodes[i]] += w * curl * spv;
            }
        }
    }
    out
}

fn extremum_in_window(
    space: &FeSpace,
    field: &[f64],
    window: [f64; 4], // x_lo, x_hi, y_lo, y_hi
    maximize: bool,
) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &[x, y]) in space.dof_coords.iter().enumerate() {
        if x < window[0] || x > window[1] || y < window[2] || y > window[3] {
            continue;
        }
        let v = field[i];
        let better = match &best {
            None => true,
            Some((bv, _, _)) => {
                if maximize {
                    v > *bv
                } else {
                    v < *bv
                }
            }
        };
        if better {
            best = Some((v, x, y));
        }
    }
    best
}

/// Advance the cavity flow to steady state and post-process: vorticity by
/// L2 projection onto the linear space, streamfunction by a Poisson solve
/// with zero boundary values, vortex extrema over nodes, and centerline
/// profiles.
pub fn run_cavity(
    re: f64,
    n: usize,
    dt: f64,
    m: usize,
    tol: f64,
    max_steps: usize,
) -> Result<CavityReport> {
    assert!(re > 0.0);
    let problem = match make_problem(ProblemId::Cavity { re }) {
        Problem::Ns(p) => p,
        _ => unreachable!(),
    };
    let mesh = Arc::new(build_uniform_unit_square(n)?);
    let (vel_space, pres_space) = taylor_hood_spaces(mesh.clone())?;
    // The grid's horizon is max_steps; the run usually stops earlier.
    let grid = TimeGrid::uniform(dt * max_steps as f64, max_steps, m);
    let mut solver = NsSolver::new(&problem, grid, vel_space.clone(), pres_space.clone(), SolverConfig::default())?;

    let mut state = solver.initial_state()?;
    let mut steps = 0usize;
    let mut steady = false;
    let mut increment = f64::INFINITY;
    while steps < max_steps {
        let outcome = solver.step(&state, steps)?;
        steps += 1;
        if outcome.diverged {
            return Err(Error::invalid(format!(
                "cavity run diverged at step {steps} (|u| = {:.3e})",
                outcome.max_abs
            )));
        }
        let diff = solver.velocity_l2_diff(&outcome.state.velocity, &state.velocity);
        let norm = solver.velocity_l2(&outcome.state.velocity);
        increment = if norm > 0.0 { diff / norm } else { diff };
        state = outcome.state;
        if increment <= tol {
            steady = true;
            break;
        }
    }

    // Vorticity: L2 projection of curl u onto the linear space.
    let p1_mass = mass_matrix(&pres_space, false);
    let rhs_omega = curl_load(&vel_space, &pres_space, &state.velocity);
    let omega = SpdSolver::new(
        p1_mass.clone(),
        SolverConfig::with_preconditioner(Preconditioner::Jacobi),
    )?
    .solve(&rhs_omega)?;

    // Streamfunction: -lap psi = omega, psi = 0 on the boundary.
    let one = |_: f64, _: f64, _: f64| 1.0;
    let zero = |_: f64, _: f64, _: f64| 0.0;
    let stiffness = diffusion_reaction_matrix(&pres_space, &one, &zero, 0.0)?;
    let rhs_psi_full = p1_mass.mul_vec(&omega);
    let eliminated = eliminate_spd(&stiffness, pres_space.boundary_dofs_all());
    let zeros = vec![0.0; pres_space.n_dofs()];
    let reduced = eliminated.reduce_rhs(&rhs_psi_full, &zeros);
    let psi_interior = SpdSolver::new(eliminated.a_ii.clone(), SolverConfig::default())?
        .solve(&reduced)?;
    let psi = eliminated.scatter(&psi_interior, &zeros);

    let (pv, px, py) = extremum_in_window(&pres_space, &psi, [0.0, 1.0, 0.0, 1.0], false)
        .expect("nonempty mesh");
    let primary = Vortex {
        label: "primary",
        psi: pv,
        x: px,
        y: py,
    };
    let mut secondary = Vec::new();
    let windows: [(&'static str, [f64; 4], bool); 5] = [
        ("first_bl", [0.0, 0.3, 0.0, 0.3], true),
        ("first_br", [0.7, 1.0, 0.0, 0.3], true),
        ("first_t", [0.0, 0.3, 0.7, 1.0], true),
        ("second_bl", [0.0, 0.1, 0.0, 0.1], false),
        ("second_br", [0.9, 1.0, 0.0, 0.1], false),
    ];
    for (label, win, maximize) in windows {
        if let Some((v, x, y)) = extremum_in_window(&pres_space, &psi, win, maximize) {
            secondary.push(Vortex {
                label,
                psi: v,
                x,
                y,
            });
        }
    }

    // Profiles sampled at the quadratic node spacing.
    let samples = 2 * n + 1;
    let mut u_centerline = Vec::with_capacity(samples);
    let mut v_centerline = Vec::with_capacity(samples);
    let mut vorticity_x = Vec::with_capacity(samples);
    let mut vorticity_y = Vec::with_capacity(samples);
    for k in 0..samples {
        let s = k as f64 / (samples - 1) as f64;
        let uv = vel_space.eval_vector(&state.velocity, 0.5, s);
        u_centerline.push((s, uv[0]));
        let uh = vel_space.eval_vector(&state.velocity, s, 0.5);
        v_centerline.push((s, uh[1]));
        vorticity_x.push((s, pres_space.eval_scalar(&omega, 0.5, s)));
        vorticity_y.push((s, pres_space.eval_scalar(&omega, s, 0.5)));
    }

    Ok(CavityReport {
        re,
        n,
        dt,
        m,
        primary,
        secondary,
        u_centerline,
        v_centerline,
        vorticity_x,
        vorticity_y,
        steps,
        steady,
        final_increment: increment,
        psi,
    })
}
