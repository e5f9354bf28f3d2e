//! End-to-end runs of the `opera` binary.

use std::path::Path;
use std::process::{Command, Output};

fn opera(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opera"))
        .args(args)
        .env_remove("OPERA_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.cfg");
    let text = format!(
        "kernel = induced(gaussian:0.5)\nsupport = linspace:0:1:5\nf_rho = 0,0.5,1,0.5,0\nT = 20,40\nn_trials = 3\nseed = 4\noutput = {}\n{extra}",
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_one_row_per_trial_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "record_at = 5,10,21,41\n");
    let out = opera(&["run", &cfg, "--theta=0.75"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_digest"]["entries"]["theta"], "0.75");
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert!(opera(&["run", &cfg]).status.success());
    let first = std::fs::read(dir.path().join("out/trials.csv")).unwrap();
    assert!(opera(&["--workers", "1", "run", &cfg]).status.success());
    assert_eq!(std::fs::read(dir.path().join("out/trials.csv")).unwrap(), first);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(opera(&["run", "/nonexistent/exp.cfg"]).status.code(), Some(2));
    assert_eq!(opera(&["frobnicate"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "bogus_key = 1\n");
    assert_eq!(opera(&["run", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "");
    assert_eq!(opera(&["run", &cfg, "--theta=1.5"]).status.code(), Some(2));
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(opera(&["report", empty.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn corrupt_csv_fails_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert!(opera(&["run", &cfg]).status.success());
    let out_dir = dir.path().join("out");
    assert!(opera(&["report", out_dir.to_str().unwrap()]).status.success());
    assert!(out_dir.join("report.json").exists());
    let trials = out_dir.join("trials.csv");
    let mut text = std::fs::read_to_string(&trials).unwrap();
    text.push_str("0,4,oops,1,1,,1,1,,opera\n");
    std::fs::write(&trials, text).unwrap();
    assert_eq!(opera(&["report", out_dir.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn verify_suite_exits_zero_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = opera(&["verify", "isometry", "--trials", "10", "--output", out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(dir.path().join("verify-isometry.json").exists());
}

#[test]
fn seed_override_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let status = Command::new(env!("CARGO_BIN_EXE_opera"))
        .args(["run", &cfg])
        .env("OPERA_SEED", "77")
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0,77,"));
}
