//! Command-line driver: single runs, convergence studies, critical-step
//! searches and the cavity benchmark, with CSV/VTK artifacts.
//!
//! Exit codes: 0 success, 1 configuration or solver failure, 2 divergence
//! (so stability sweeps can script over it).

mod config;
mod emit;
mod fixtures;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use emit::{sci, write_atomic};
use splitfem::cd::{CdSolver, TimeGrid};
use splitfem::harness::{
    find_critical_dt, run_cavity, run_convergence_study, Axis, ConvergenceStudy,
};
use splitfem::mesh::build_uniform_unit_square;
use splitfem::ns::{taylor_hood_spaces, NsSolver};
use splitfem::problems::{l2_error, l2_error_vector, make_problem_with_eps, Problem};
use splitfem::solver::SolverConfig;
use splitfem::space::{build_space, interpolate};

#[derive(Parser)]
#[command(
    name = "splitfem",
    about = "Operator-splitting finite element solvers on the unit square",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem to its final time and emit field/log artifacts.
    Run(RunArgs),
    /// Run a convergence study over a mesh or step-size ladder.
    Converge(ConvergeArgs),
    /// Find the largest stable global step per multistep index.
    CriticalDt(CriticalArgs),
    /// Advance the lid-driven cavity to steady state and post-process.
    Cavity(CavityArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Load all settings from a key = value config file instead of flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Mesh subdivisions per side.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    /// Multistep index (transport substeps per correction).
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    re: Option<f64>,
    /// Diffusion-coefficient override for the transport problems.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Row-sum mass lumping in the transport substep.
    #[arg(long, default_value_t = false)]
    lumped: bool,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = false)]
    emit_vtk: bool,
    /// With --emit-vtk: also write a field snapshot every k steps.
    #[arg(long)]
    vtk_every: Option<usize>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    problem: String,
    /// Refinement axis: "h" or "dt".
    #[arg(long)]
    axis: String,
    /// Ladder values: mesh subdivisions for axis h, step sizes for axis dt.
    #[arg(long, value_delimiter = ',', required = true)]
    ladder: Vec<f64>,
    /// Fixed mesh subdivisions (time studies).
    #[arg(long)]
    n: Option<usize>,
    /// Fixed step size (space studies).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Report errors relative to the exact-solution norm.
    #[arg(long, default_value_t = false)]
    relative: bool,
    #[arg(long, default_value_t = false)]
    lumped: bool,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: usize,
    /// Multistep indices to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long)]
    dt_seed: f64,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, default_value_t = 60)]
    budget: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CavityArgs {
    #[arg(long)]
    re: f64,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 0.004)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Steady-state stopping tolerance on the relative step increment.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn check_thread_env() {
    if let Ok(v) = std::env::var("SPLITFEM_THREADS") {
        match v.parse::<usize>() {
            Ok(1) => {}
            Ok(k) => eprintln!(
                "note: SPLITFEM_THREADS={k} requested; execution is single-threaded \
                 (deterministic), extra threads are not used"
            ),
            Err(_) => eprintln!("note: ignoring unparsable SPLITFEM_THREADS={v}"),
        }
    }
}

fn main() -> ExitCode {
    check_thread_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Converge(args) => cmd_converge(args),
        Command::CriticalDt(args) => cmd_critical(args),
        Command::Cavity(args) => cmd_cavity(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run_config_from(args: &RunArgs) -> Result<RunConfig, String> {
    if let Some(path) = &args.config {
        return RunConfig::parse_file(path).map_err(|e| e.to_string());
    }
    let cfg = RunConfig {
        problem: args.problem.clone().unwrap_or_default(),
        n: args.n.unwrap_or(0),
        t_final: args.t_final,
        n_steps: args.n_steps,
        dt: args.dt,
        m: args.m,
        re: args.re,
        eps: args.eps,
        vtk_every: args.vtk_every,
        lumped: args.lumped,
        rel_tol: args.rel_tol,
        out_dir: args.out.clone(),
        emit_vtk: args.emit_vtk,
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn grid_from(cfg: &RunConfig) -> TimeGrid {
    match (cfg.n_steps, cfg.dt) {
        (Some(n), None) => TimeGrid::uniform(cfg.t_final, n, cfg.m),
        (None, Some(dt)) => TimeGrid::with_dt(cfg.t_final, dt, cfg.m),
        _ => unreachable!("validated"),
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let cfg = run_config_from(&args)?;
    let grid = grid_from(&cfg);
    let id = cfg.problem_id().map_err(|e| e.to_string())?;
    let solver_cfg = SolverConfig {
        rel_tol: cfg.rel_tol,
        ..Default::default()
    };
    let mesh = Arc::new(build_uniform_unit_square(cfg.n).map_err(|e| e.to_string())?);

    let mut summary = String::new();
    summary.push_str("# run summary\n");
    summary.push_str(&format!("config_hash = {}\n", cfg.hash()));
    summary.push_str(&cfg.serialize());
    summary.push_str(&format!("effective_dt = {:e}\n", grid.dt()));
    summary.push_str(&format!("global_steps = {}\n", grid.n_steps));

    let mut diverged = false;
    match make_problem_with_eps(id, cfg.eps) {
        Problem::Cd(problem) => {
            let space = Arc::new(build_space(mesh, 1, 1).map_err(|e| e.to_string())?);
            let mut solver = CdSolver::new(&problem, grid, space.clone(), cfg.lumped, solver_cfg)
                .map_err(|e| e.to_string())?;
            let mut state =
                interpolate(&space, &*problem.u_0, 0.0).map_err(|e| e.to_string())?;
            let mut log = String::from("time,max_abs\n");
            log.push_str(&format!("0,{:.10e}\n", splitfem::sparse::norm_inf(&state)));
            for n in 0..grid.n_steps {
                let out = solver.step(&state, n).map_err(|e| e.to_string())?;
                log.push_str(&format!("{},{:.10e}\n", grid.time(n + 1), out.max_abs));
                diverged = out.diverged;
                state = out.state;
                if let Some(every) = cfg.vtk_every.filter(|_| cfg.emit_vtk) {
                    if (n + 1) % every == 0 {
                        let mut buf = Vec::new();
                        splitfem::vtk::write_scalar_field(&mut buf, &space, &state, "u")
                            .map_err(|e| e.to_string())?;
                        write_atomic(
                            &cfg.out_dir.join(format!("field_{:06}.vtk", n + 1)),
                            &String::from_utf8_lossy(&buf),
                        )
                        .map_err(|e| e.to_string())?;
                    }
                }
                if diverged {
                    break;
                }
            }
            if let Some(exact) = &problem.exact {
                if !diverged {
                    let e = l2_error(&state, &space, &**exact, grid.t_final);
                    summary.push_str(&format!("l2_error = {e:.10e}\n"));
                    summary.push_str(&format!("l2_error_sci = {}\n", sci(e)));
                }
            }
            summary.push_str(&format!("diverged = {diverged}\n"));
            if cfg.emit_csv {
                write_atomic(&cfg.out_dir.join("steps.csv"), &log).map_err(|e| e.to_string())?;
            }
            if cfg.emit_vtk {
                let mut buf = Vec::new();
                splitfem::vtk::write_scalar_field(&mut buf, &space, &state, "u")
                    .map_err(|e| e.to_string())?;
                write_atomic(&cfg.out_dir.join("field.vtk"), &String::from_utf8_lossy(&buf))
                    .map_err(|e| e.to_string())?;
            }
        }
        Problem::Ns(problem) => {
            let (vel_space, pres_space) = taylor_hood_spaces(mesh).map_err(|e| e.to_string())?;
            let mut solver = NsSolver::new(
                &problem,
                grid,
                vel_space.clone(),
                pres_space.clone(),
                solver_cfg,
            )
            .map_err(|e| e.to_string())?;
            let mut state = solver.initial_state().map_err(|e| e.to_string())?;
            let mut log = String::from("time,max_abs,kinetic_energy,divergence_residual\n");
            log.push_str(&format!(
                "0,{:.10e},{:.10e},{:.10e}\n",
                splitfem::sparse::norm_inf(&state.velocity),
                solver.kinetic_energy(&state.velocity),
                solver.divergence_residual_norm(&state.velocity)
            ));
            for n in 0..grid.n_steps {
                let out = solver.step(&state, n).map_err(|e| e.to_string())?;
                diverged = out.diverged;
                state = out.state;
                log.push_str(&format!(
                    "{},{:.10e},{:.10e},{:.10e}\n",
                    state.time,
                    out.max_abs,
                    solver.kinetic_energy(&state.velocity),
                    solver.divergence_residual_norm(&state.velocity)
                ));
                if let Some(every) = cfg.vtk_every.filter(|_| cfg.emit_vtk) {
                    if (n + 1) % every == 0 {
                        let mut buf = Vec::new();
                        splitfem::vtk::write_vector_field(
                            &mut buf,
                            &vel_space,
                            &state.velocity,
                            "velocity",
                        )
                        .map_err(|e| e.to_string())?;
                        write_atomic(
                            &cfg.out_dir.join(format!("velocity_{:06}.vtk", n + 1)),
                            &String::from_utf8_lossy(&buf),
                        )
                        .map_err(|e| e.to_string())?;
                    }
                }
                if diverged {
                    break;
                }
            }
            if !diverged {
                if let Some(exact) = &problem.exact_velocity {
                    let e = l2_error_vector(&state.velocity, &vel_space, &**exact, grid.t_final);
                    summary.push_str(&format!("velocity_l2_error = {e:.10e}\n"));
                    summary.push_str(&format!("velocity_l2_error_sci = {}\n", sci(e)));
                }
                if let Some(exact) = &problem.exact_pressure {
                    let e = l2_error(&state.pressure, &pres_space, &**exact, grid.t_final);
                    summary.push_str(&format!("pressure_l2_error = {e:.10e}\n"));
                    summary.push_str(&format!("pressure_l2_error_sci = {}\n", sci(e)));
                }
            }
            summary.push_str(&format!("diverged = {diverged}\n"));
            if cfg.emit_csv {
                write_atomic(&cfg.out_dir.join("steps.csv"), &log).map_err(|e| e.to_string())?;
            }
            if cfg.emit_vtk {
                let mut buf = Vec::new();
                splitfem::vtk::write_vector_field(&mut buf, &vel_space, &state.velocity, "velocity")
                    .map_err(|e| e.to_string())?;
                write_atomic(
                    &cfg.out_dir.join("velocity.vtk"),
                    &String::from_utf8_lossy(&buf),
                )
                .map_err(|e| e.to_string())?;
                let mut buf = Vec::new();
                splitfem::vtk::write_scalar_field(
                    &mut buf,
                    &pres_space,
                    &state.pressure,
                    "pressure",
                )
                .map_err(|e| e.to_string())?;
                write_atomic(
                    &cfg.out_dir.join("pressure.vtk"),
                    &String::from_utf8_lossy(&buf),
                )
                .map_err(|e| e.to_string())?;
            }
        }
    }

    if cfg.emit_summary {
        write_atomic(&cfg.out_dir.join("summary.txt"), &summary).map_err(|e| e.to_string())?;
    }
    print!("{summary}");
    Ok(if diverged { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_converge(args: ConvergeArgs) -> Result<ExitCode, String> {
    let cfg = RunConfig {
        problem: args.problem.clone(),
        n: args.n.unwrap_or(1).max(1),
        dt: args.dt.or(Some(1.0)),
        re: args.re,
        m: args.m,
        ..Default::default()
    };
    let id = cfg.problem_id().map_err(|e| e.to_string())?;

    let axis = match args.axis.as_str() {
        "h" => Axis::Space,
        "dt" => Axis::Time,
        other => return Err(format!("unknown axis '{other}' (expected h or dt)")),
    };
    let study = match axis {
        Axis::Space => {
            let dt = args.dt.ok_or("space studies need --dt")?;
            let ladder: Vec<usize> = args.ladder.iter().map(|&v| v as usize).collect();
            if ladder.iter().any(|&n| n == 0) {
                return Err("mesh ladder entries must be positive integers".into());
            }
            ConvergenceStudy {
                t_final: args.t_final,
                lumped: args.lumped,
                rel_tol: args.rel_tol,
                relative_errors: args.relative,
                ..ConvergenceStudy::space(id, dt, args.m, ladder)
            }
        }
        Axis::Time => {
            let n = args.n.ok_or("time studies need --n")?;
            ConvergenceStudy {
                t_final: args.t_final,
                lumped: args.lumped,
                rel_tol: args.rel_tol,
                relative_errors: args.relative,
                ..ConvergenceStudy::time(id, n, args.m, args.ladder.clone())
            }
        }
    };

    let report = run_convergence_study(&study).map_err(|e| e.to_string())?;
    let csv = emit::convergence_csv(&report);
    write_atomic(&args.out.join("convergence.csv"), &csv).map_err(|e| e.to_string())?;
    print!("{csv}");
    let any_divergence = report.rows.iter().any(|r| r.error.is_none());
    Ok(if any_divergence { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_critical(args: CriticalArgs) -> Result<ExitCode, String> {
    let cfg = RunConfig {
        problem: args.problem.clone(),
        n: args.n,
        dt: Some(args.dt_seed),
        re: args.re,
        ..Default::default()
    };
    let id = cfg.problem_id().map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for &m in &args.m {
        if m == 0 {
            return Err("m must be at least 1".into());
        }
        let r = find_critical_dt(id, args.n, m, args.dt_seed, args.t_final, args.budget)
            .map_err(|e| e.to_string())?;
        println!(
            "m = {:3}: dt_crit = {} (bracket [{}, {}], {} probes{})",
            r.m,
            sci(r.dt_crit),
            sci(r.bracket.0),
            sci(r.bracket.1),
            r.probes_used,
            if r.unbounded { ", unbounded" } else { "" }
        );
        results.push(r);
    }
    let csv = emit::critical_dt_csv(&results);
    write_atomic(&args.out.join("critical_dt.csv"), &csv).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_cavity(args: CavityArgs) -> Result<ExitCode, String> {
    if args.re <= 0.0 {
        return Err("re must be positive".into());
    }
    let report = run_cavity(args.re, args.n, args.dt, args.m, args.tol, args.max_steps)
        .map_err(|e| e.to_string())?;

    println!(
        "steady after {} steps (increment {:.2e}, steady = {})",
        report.steps, report.final_increment, report.steady
    );
    println!(
        "primary vortex: psi_min = {} at ({:.4}, {:.4})",
        sci(report.primary.psi),
        report.primary.x,
        report.primary.y
    );
    for v in &report.secondary {
        println!(
            "{:10}: psi = {} at ({:.4}, {:.4})",
            v.label,
            sci(v.psi),
            v.x,
            v.y
        );
    }

    write_atomic(&args.out.join("cavity_vortices.csv"), &emit::cavity_vortex_csv(&report))
        .map_err(|e| e.to_string())?;
    write_atomic(
        &args.out.join("u_centerline.csv"),
        &emit::profile_csv(("y", "u_x"), &report.u_centerline),
    )
    .map_err(|e| e.to_string())?;
    write_atomic(
        &args.out.join("v_centerline.csv"),
        &emit::profile_csv(("x", "u_y"), &report.v_centerline),
    )
    .map_err(|e| e.to_string())?;
    write_atomic(
        &args.out.join("vorticity_x05.csv"),
        &emit::profile_csv(("y", "omega"), &report.vorticity_x),
    )
    .map_err(|e| e.to_string())?;
    write_atomic(
        &args.out.join("vorticity_y05.csv"),
        &emit::profile_csv(("x", "omega"), &report.vorticity_y),
    )
    .map_err(|e| e.to_string())?;

    if let Some(reference) = fixtures::vortices_for(args.re) {
        let deltas = emit::vortex_deltas(&report, reference);
        write_atomic(&args.out.join("ghia_vortex_deltas.csv"), &deltas)
            .map_err(|e| e.to_string())?;
        print!("{deltas}");
    }
    if let Some((u_ref, v_ref)) = fixtures::profiles_for(args.re) {
        let deltas = emit::profile_deltas(&report, u_ref, v_ref);
        write_atomic(&args.out.join("ghia_profile_deltas.csv"), &deltas)
            .map_err(|e| e.to_string())?;
    }

    if !report.steady {
        eprintln!("warning: step budget exhausted before the steady-state criterion");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
