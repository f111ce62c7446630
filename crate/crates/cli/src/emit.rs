//! File emission: atomic writes (temp + rename), CSV tables with both a
//! raw float column and a mantissa(exponent)-style column, and the
//! structured run summary.

use std::io::Write;
use std::path::Path;

use splitfem::harness::{CavityReport, ConvergenceReport, CriticalDtResult};

/// Write atomically: the content lands under the final name only when
/// complete.
pub fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Scientific notation in the tables' mantissa(exponent) style:
/// 1.60997(-3), 2.02151, 9.18526(+1).
pub fn sci(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let mantissa = x / 10f64.powi(exp);
    if exp == 0 {
        format!("{mantissa:.5}")
    } else {
        format!("{mantissa:.5}({exp:+})")
    }
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "divergence".to_string(), f)
}

fn opt_blank(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map_or_else(String::new, f)
}

/// Convergence table as CSV: resolution, error (raw + styled), order, and
/// pressure columns when present.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let axis = match report.axis {
        splitfem::harness::Axis::Space => "h",
        splitfem::harness::Axis::Time => "dt",
    };
    let has_pressure = report.rows.iter().any(|r| r.pressure_error.is_some());
    let mut out = String::new();
    if has_pressure {
        out.push_str(&format!(
            "{axis},velocity_error,velocity_error_sci,order,pressure_error,pressure_error_sci,pressure_order\n"
        ));
    } else {
        out.push_str(&format!("{axis},error,error_sci,order\n"));
    }
    for row in &report.rows {
        if has_pressure {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.resolution,
                opt(row.error, |e| format!("{e:.17e}")),
                opt(row.error, sci),
                opt_blank(row.order, |o| format!("{o:.4}")),
                opt(row.pressure_error, |e| format!("{e:.17e}")),
                opt(row.pressure_error, sci),
                opt_blank(row.pressure_order, |o| format!("{o:.4}")),
            ));
        } else {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.resolution,
                opt(row.error, |e| format!("{e:.17e}")),
                opt(row.error, sci),
                opt_blank(row.order, |o| format!("{o:.4}")),
            ));
        }
    }
    out
}

pub fn critical_dt_csv(results: &[CriticalDtResult]) -> String {
    let mut out = String::from("m,dt_crit,bracket_lo,bracket_hi,probes,unbounded\n");
    for r in results {
        out.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e},{},{}\n",
            r.m, r.dt_crit, r.bracket.0, r.bracket.1, r.probes_used, r.unbounded
        ));
    }
    out
}

pub fn cavity_vortex_csv(report: &CavityReport) -> String {
    let mut out = String::from("vortex,psi,psi_sci,x,y\n");
    let mut push = |label: &str, psi: f64, x: f64, y: f64| {
        out.push_str(&format!("{label},{psi:.10e},{},{x},{y}\n", sci(psi)));
    };
    push(report.primary.label, report.primary.psi, report.primary.x, report.primary.y);
    for v in &report.secondary {
        push(v.label, v.psi, v.x, v.y);
    }
    out
}

pub fn profile_csv(header: (&str, &str), rows: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        out.push_str(&format!("{a},{b:.10e}\n"));
    }
    out
}

/// Deviation of computed vortex data from a reference set, by label.
pub fn vortex_deltas(
    report: &CavityReport,
    reference: &[crate::fixtures::VortexRef],
) -> String {
    let mut out = String::from("vortex,psi,psi_ref,rel_dev,dx,dy\n");
    let all: Vec<(&str, f64, f64, f64)> = std::iter::once((
        report.primary.label,
        report.primary.psi,
        report.primary.x,
        report.primary.y,
    ))
    .chain(report.secondary.iter().map(|v| (v.label, v.psi, v.x, v.y)))
    .collect();
    for &(label, psi_ref, x_ref, y_ref) in reference {
        if let Some(&(_, psi, x, y)) = all.iter().find(|(l, _, _, _)| *l == label) {
            let rel = (psi - psi_ref).abs() / psi_ref.abs().max(1e-300);
            out.push_str(&format!(
                "{label},{psi:.6e},{psi_ref:.6e},{rel:.4},{:.4},{:.4}\n",
                x - x_ref,
                y - y_ref
            ));
        }
    }
    out
}

/// Linear interpolation of a sampled profile at an arbitrary abscissa.
fn profile_at(profile: &[(f64, f64)], s: f64) -> f64 {
    match profile.iter().position(|&(x, _)| x >= s) {
        Some(0) => profile[0].1,
        Some(i) => {
            let (x0, v0) = profile[i - 1];
            let (x1, v1) = profile[i];
            let w = (s - x0) / (x1 - x0);
            v0 + w * (v1 - v0)
        }
        None => profile.last().map_or(0.0, |&(_, v)| v),
    }
}

/// Deviation of the computed centerline profiles from reference samples.
pub fn profile_deltas(
    report: &CavityReport,
    u_ref: &[(f64, f64)],
    v_ref: &[(f64, f64)],
) -> String {
    let mut out = String::from("profile,coord,value,reference,deviation\n");
    let mut max_u = 0.0f64;
    let mut max_v = 0.0f64;
    for &(y, u) in u_ref {
        let mine = profile_at(&report.u_centerline, y);
        max_u = max_u.max((mine - u).abs());
        out.push_str(&format!("u_x(0.5,y),{y},{mine:.6e},{u:.6e},{:.4e}\n", mine - u));
    }
    for &(x, v) in v_ref {
        let mine = profile_at(&report.v_centerline, x);
        max_v = max_v.max((mine - v).abs());
        out.push_str(&format!("u_y(x,0.5),{x},{mine:.6e},{v:.6e},{:.4e}\n", mine - v));
    }
    out.push_str(&format!("max_deviation_u,,,,{max_u:.4e}\n"));
    out.push_str(&format!("max_deviation_v,,,,{max_v:.4e}\n"));
    out
}
