use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "points_per_dim = 16\nside_length = 16\nsnapshot_count = 24\n";

fn critheat(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_critheat"));
    cmd.args(args).env_remove("CRITHEAT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_with(dir: &Path, experiment: &str, config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{experiment}"));
    critheat(
        &[experiment, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    )
}

fn summary(dir: &Path, experiment: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("out-{experiment}/summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn bubble_constants_with_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "bubble-constants", "");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out-bubble-constants/series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    let s = summary(dir.path(), "bubble-constants");
    assert_eq!(s["passed"], true);
    assert_eq!(s["config"]["points_per_dim"], 32);
    assert_eq!(s["config"]["side_length"], 32.0);
    assert_eq!(s["config"]["delta"], 0.1);
    assert!(s["t_box"].as_f64().unwrap() > 0.0);
    assert!(s["version"].is_string());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "lyapunov", "points_per_dim = 15\n");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("points_per_dim"), "{err}");

    let out = run_with(dir.path(), "nonlinear-decay", "profile_r = -2.5\n");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("profile_r") && err.contains("> -2"), "{err}");

    for bad in ["speed = 3\n", "dt = 0.1\ndt = 0.2\n", "dt = -1\n", "datum = blob\n"] {
        assert_eq!(run_with(dir.path(), "lyapunov", bad).status.code(), Some(2), "{bad}");
    }
    let missing = critheat(&["lyapunov", "--config", "/nonexistent.cfg", "--out", "/tmp/x"], &[]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = critheat(&["warp-drive", "--config", "a", "--out", "b"], &[]);
    assert_eq!(unknown.status.code(), Some(2));

    let cfg = dir.path().join("empty.cfg");
    fs::write(&cfg, "").unwrap();
    let args = ["bubble-constants", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
    assert_eq!(critheat(&args, &[("CRITHEAT_THREADS", "many")]).status.code(), Some(2));
    assert_eq!(critheat(&args, &[("CRITHEAT_THREADS", "2")]).status.code(), Some(0));
}

#[test]
fn lyapunov_small_grid_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "lyapunov", &format!("{SMALL}delta = 0.1\n"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out-lyapunov/series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 25);
    assert!(csv.starts_with("t,h1_sq,grad_h1_sq,energy,l4_fourth,l6_accum,low_sq,high_sq,pairing,pairing_ratio\n"));
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // Data with r* = 0 cannot decay like a datum with q* = 1.
    let out = run_with(dir.path(), "linear-decay", &format!("{SMALL}q_star = 1\n"));
    assert_eq!(out.status.code(), Some(1));
    let s = summary(dir.path(), "linear-decay");
    assert_eq!(s["passed"], false);
    assert!(s["fit_window"].is_array());
}

#[test]
fn energy_identity_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "energy-identity", &format!("{SMALL}t_end = 1\n"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "energy-identity");
    assert_eq!(s["results"]["residuals"].as_array().unwrap().len(), 3);
}
