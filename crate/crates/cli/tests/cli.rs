//! End-to-end checks of the command-line surface: exit-status contract,
//! artifact emission, and flag/file configuration parity.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splitfem"))
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("splitfem_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_zero_problem_writes_zero_fields_and_exits_zero() {
    // The zero-data fixed point: all-zero field artifacts, exit 0.
    let dir = tmp_dir("zero");
    let out = bin()
        .args([
            "run",
            "--problem",
            "ns-example4",
            "--re",
            "5000",
            "--n",
            "2",
            "--n-steps",
            "2",
            "--t-final",
            "1e-12", // exact solution ~ 0 at tiny times
            "--emit-vtk",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("steps.csv").exists());
    assert!(dir.join("summary.txt").exists());
    assert!(dir.join("velocity.vtk").exists());
    let summary = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("diverged = false"));
    assert!(summary.contains("config_hash = "));
}

#[test]
fn divergent_run_exits_two() {
    let dir = tmp_dir("div");
    let status = bin()
        .args([
            "run", "--problem", "cd-example1", "--n", "64", "--dt", "0.25", "--m", "1", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn config_file_matches_flags() {
    let dir_a = tmp_dir("flags");
    let dir_b = tmp_dir("file");
    let out_a = bin()
        .args([
            "run",
            "--problem",
            "cd-example2",
            "--n",
            "8",
            "--dt",
            "0.025",
            "--m",
            "2",
            "--out",
        ])
        .arg(&dir_a)
        .output()
        .unwrap();
    assert!(out_a.status.success());

    let config_text = format!(
        "problem = cd-example2\nn = 8\ndt = 2.5e-2\nm = 2\nout_dir = {}\n",
        dir_b.display()
    );
    let cfg_path = dir_b.join("run.cfg");
    std::fs::write(&cfg_path, config_text).unwrap();
    let out_b = bin()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out_b.status.success(), "{}", String::from_utf8_lossy(&out_b.stderr));

    let err = |p: &Path| {
        let s = std::fs::read_to_string(p.join("summary.txt")).unwrap();
        s.lines()
            .find(|l| l.starts_with("l2_error ="))
            .unwrap()
            .to_string()
    };
    assert_eq!(err(&dir_a), err(&dir_b));
}

#[test]
fn bad_flags_exit_one() {
    // m = 0 violates the config invariants.
    let status = bin()
        .args([
            "run", "--problem", "cd-example1", "--n", "4", "--dt", "0.1", "--m", "0",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Unknown key in a config file names the key.
    let dir = tmp_dir("badkey");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "problem = cd-example1\nn = 4\ndt = 0.1\nwibble = 3\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wibble"));
}

#[test]
fn converge_emits_table_csv() {
    let dir = tmp_dir("conv");
    let out = bin()
        .args([
            "converge",
            "--problem",
            "cd-example2",
            "--axis",
            "h",
            "--ladder",
            "4,8",
            "--dt",
            "0.01",
            "--m",
            "1",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "h,error,error_sci,order");
    assert_eq!(csv.lines().count(), 3);
    // Second data row carries an order.
    let last = csv.lines().last().unwrap();
    assert!(!last.ends_with(','), "missing order column: {last}");
}

#[test]
fn critical_dt_emits_csv() {
    let dir = tmp_dir("crit");
    let out = bin()
        .args([
            "critical-dt",
            "--problem",
            "cd-example1",
            "--n",
            "16",
            "--m",
            "1",
            "--dt-seed",
            "0.01",
            "--budget",
            "40",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("critical_dt.csv")).unwrap();
    assert!(csv.starts_with("m,dt_crit,bracket_lo,bracket_hi,probes,unbounded"));
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn cavity_smoke_emits_reports() {
    // A deliberately tiny, far-from-steady cavity run: the command must
    // still emit all reports and flag the unsteady stop with exit 2.
    let dir = tmp_dir("cavity");
    let out = bin()
        .args([
            "cavity",
            "--re",
            "100",
            "--n",
            "8",
            "--dt",
            "0.02",
            "--max-steps",
            "5",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "cavity_vortices.csv",
        "u_centerline.csv",
        "v_centerline.csv",
        "vorticity_x05.csv",
        "vorticity_y05.csv",
        "ghia_profile_deltas.csv",
    ] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
}
