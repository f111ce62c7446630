//! Regression pins of benchmark error values and the remaining scheme
//! invariants that need medium-sized runs: reference single-step errors,
//! the multistep convergence-order ranges, resolution-independence of the
//! purely-temporal flow problem, and critical-step doubling for the flow
//! scheme.

use splitfem::cd::TimeGrid;
use splitfem::harness::{
    find_critical_dt, run_convergence_study, run_problem_once, ConvergenceStudy,
};
use splitfem::problems::ProblemId;

fn assert_close(value: f64, reference: f64, rel: f64, what: &str) {
    assert!(
        (value - reference).abs() <= rel * reference.abs(),
        "{what}: {value:.6e} vs reference {reference:.6e} (tolerance {rel:.1e})"
    );
}

#[test]
fn cd_single_step_reference_error() {
    // Second transport problem, dt = 0.1/2^7 at h = 1/128: reference
    // absolute L2 error 1.71484e-4.
    let run = run_problem_once(
        ProblemId::CdExample2,
        128,
        TimeGrid::uniform(1.0, 1280, 1),
        false,
        1e-10,
    )
    .unwrap();
    assert!(!run.diverged);
    assert_close(run.error.unwrap(), 1.71484e-4, 5e-3, "cd single-step error");
}

#[test]
fn cd_multistep_reference_pair() {
    // Second transport problem with index 128 at h = 1/128: absolute errors
    // 8.69440e-2 and 4.27948e-2 across one halving, order 1.0227.
    let study = ConvergenceStudy::time(ProblemId::CdExample2, 128, 128, vec![0.1, 0.05]);
    let report = run_convergence_study(&study).unwrap();
    let errors: Vec<f64> = report.rows.iter().map(|r| r.error.unwrap()).collect();
    assert_close(errors[0], 8.69440e-2, 1e-2, "m=128 error at dt=0.1");
    assert_close(errors[1], 4.27948e-2, 1e-2, "m=128 error at dt=0.05");
    let order = report.rows[1].order.unwrap();
    assert_close(order, 1.0227, 2e-2, "m=128 order");
}

#[test]
fn ns_single_step_reference_errors() {
    // Flow vortex problem at Re = 5000: velocity errors at dt = 0.2 and
    // 0.1 (temporal error dominates well above the h = 1/64 spatial floor).
    for (dt, n_steps, reference) in [(0.2, 5usize, 3.28203e-3), (0.1, 10, 1.65607e-3)] {
        let run = run_problem_once(
            ProblemId::NsExample3 { re: 5000.0 },
            64,
            TimeGrid::uniform(1.0, n_steps, 1),
            false,
            1e-10,
        )
        .unwrap();
        assert!(!run.diverged);
        assert_close(
            run.error.unwrap(),
            reference,
            1e-2,
            &format!("ns velocity error at dt={dt}"),
        );
    }
}

#[test]
fn ns_purely_temporal_problem_is_resolution_independent() {
    // The quadratic/linear exact solution is captured exactly in space, so
    // refining the mesh at fixed dt leaves the errors unchanged within 5%.
    let n_steps = 80; // dt = 1/80
    let mut errors = Vec::new();
    for n in [8usize, 16] {
        let run = run_problem_once(
            ProblemId::NsExample4 { re: 5000.0 },
            n,
            TimeGrid::uniform(1.0, n_steps, 2),
            false,
            1e-10,
        )
        .unwrap();
        assert!(!run.diverged);
        errors.push(run.error.unwrap());
    }
    let rel = (errors[0] - errors[1]).abs() / errors[1];
    assert!(
        rel < 0.05,
        "errors changed {rel:.3} under refinement: {errors:?}"
    );
}

#[test]
fn ns_multistep_temporal_orders_in_range() {
    // Fixed index 64 at h = 1/48, halving the global step: velocity orders
    // near one, pressure orders climbing through [0.73, 1.0].
    let mut study = ConvergenceStudy::time(
        ProblemId::NsExample4 { re: 5000.0 },
        48,
        64,
        vec![0.1, 0.05, 0.025, 0.0125],
    );
    study.t_final = 1.0;
    let report = run_convergence_study(&study).unwrap();
    for row in report.rows.iter().skip(1) {
        let vo = row.order.unwrap();
        let po = row.pressure_order.unwrap();
        assert!(
            (0.95..=1.1).contains(&vo),
            "velocity order {vo:.4} outside [0.95, 1.1]"
        );
        assert!(
            (0.73..=1.0).contains(&po),
            "pressure order {po:.4} outside [0.73, 1.0]"
        );
    }
}

#[test]
fn ns_critical_dt_doubles_with_the_index() {
    // Doubling the multistep index roughly doubles the largest stable step
    // for the flow scheme as well.
    let mut crit = Vec::new();
    for m in [10usize, 20] {
        let seed = 0.002 * m as f64;
        let r = find_critical_dt(
            ProblemId::NsExample4 { re: 10000.0 },
            32,
            m,
            seed,
            1.0,
            40,
        )
        .unwrap();
        assert!(!r.unbounded);
        crit.push(r.dt_crit);
    }
    let ratio = crit[1] / crit[0];
    assert!(
        (1.6..=2.4).contains(&ratio),
        "flow doubling ratio {ratio:.3} outside [1.6, 2.4] ({crit:?})"
    );
}
