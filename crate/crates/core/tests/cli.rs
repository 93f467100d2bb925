use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flexctl::simulator::{SUMMARY_HEADER, TRACE_HEADER};

fn flexctl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexctl"))
        .args(args)
        .current_dir(dir)
        .env_remove("FLEXCTL_SEED")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn run_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["run", "--seed", "1", "--out", "trace.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = read(dir.path(), "trace.csv");
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER);
    assert!(trace.lines().count() > 50);
    let manifest = read(dir.path(), "trace.csv.manifest");
    assert!(manifest.contains("# command = run"));
    assert!(manifest.contains("params.R = 1.3"));
    assert!(manifest.contains("gains.k_E_s = 725"));
    assert!(manifest.contains("schedule.seed = 1"));
}

#[test]
fn inverted_period_bounds_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["run", "--h-min", "0.3", "--h-max", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn bad_flag_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flexctl(dir.path(), &["run", "--gain-mode", "adaptive"]).status.code(), Some(2));
    assert_eq!(flexctl(dir.path(), &["run", "--seed", "abc"]).status.code(), Some(2));
    assert_eq!(flexctl(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn paper_literal_model_diverges_with_partial_trace() {
    // the decoupled θ row grows like e^t, so the 1e9 guard trips after ~20 s
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(
        dir.path(),
        &[
            "run",
            "--gain-mode",
            "constant",
            "--fidelity",
            "paper_literal",
            "--duration",
            "60",
            "--out",
            "literal.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let trace = read(dir.path(), "literal.csv");
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER);
    assert!(trace.lines().count() > 10);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let flag = flexctl(dir.path(), &["run", "--seed", "8", "--out", "a.csv"]);
    assert_eq!(flag.status.code(), Some(0));
    let env = Command::new(env!("CARGO_BIN_EXE_flexctl"))
        .args(["run", "--out", "b.csv"])
        .current_dir(dir.path())
        .env("FLEXCTL_SEED", "8")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(0));
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));
}

#[test]
fn flags_override_config_file_and_manifest_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.txt"),
        "# slower schedule\nschedule.seed = 5\nschedule.h_max = 0.15\nduration = 3\n",
    )
    .unwrap();
    let out = flexctl(dir.path(), &["run", "--config", "cfg.txt", "--seed", "6", "--out", "a.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = read(dir.path(), "a.csv.manifest");
    assert!(manifest.contains("schedule.seed = 6"));
    assert!(manifest.contains("schedule.h_max = 0.15"));
    assert!(manifest.contains("duration = 3"));

    let out = flexctl(dir.path(), &["run", "--config", "a.csv.manifest", "--out", "b.csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.txt"), "gains.k_Q = 3\n").unwrap();
    let out = flexctl(dir.path(), &["run", "--config", "cfg.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_writes_paired_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["compare", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["dynamic.csv", "constant.csv", "summary.csv", "summary.csv.manifest"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let dynamic = read(dir.path(), "dynamic.csv");
    let constant = read(dir.path(), "constant.csv");
    let h_col = |s: &str| -> Vec<String> {
        s.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().to_string()).collect()
    };
    assert_eq!(h_col(&dynamic), h_col(&constant));

    let summary = read(dir.path(), "summary.csv");
    let mut lines = summary.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1].len(), 64);
    for v in &row[2..] {
        assert!(v.parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn compare_seed_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["compare", "--seed", "1", "--seeds", "10", "--out", "sweep"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = read(&dir.path().join("sweep"), "summary.csv");
    let seeds: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, (1..=10).map(|s| s.to_string()).collect::<Vec<_>>());
}

fn stable_cells(csv: &str) -> usize {
    csv.lines()
        .skip(1)
        .filter(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() <= 0.0)
        .count()
}

#[test]
fn stability_map_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["stability-map"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = read(dir.path(), "stability_map.csv");
    assert_eq!(csv.lines().next().unwrap(), "axis1,axis2,V1_margin");
    assert_eq!(csv.lines().count(), 2501);
}

#[test]
fn stability_map_smaller_kp_is_not_more_stable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(flexctl(dir.path(), &["stability-map", "--kp", "50", "--out", "low.csv"]).status.code(), Some(0));
    assert_eq!(flexctl(dir.path(), &["stability-map", "--kp", "565", "--out", "high.csv"]).status.code(), Some(0));
    assert!(stable_cells(&read(dir.path(), "low.csv")) <= stable_cells(&read(dir.path(), "high.csv")));
}

#[test]
fn stability_map_single_point_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(
        dir.path(),
        &[
            "stability-map",
            "--h-steps", "1",
            "--omega-steps", "1",
            "--omega-max", "0",
            "--theta", "2",
            "--current", "0",
            "--out", "one.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = read(dir.path(), "one.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].rsplit(',').next().unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn stability_map_rejects_empty_axis() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["stability-map", "--h-steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["validate"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("max_error"));
    assert_eq!(stdout.matches("PASS").count(), 5);
}

#[test]
fn validate_fails_with_coarse_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let out = flexctl(dir.path(), &["validate", "--tol", "1e-1"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    let exp_line = stdout.lines().find(|l| l.starts_with("exponential")).unwrap();
    assert!(exp_line.ends_with("FAIL"), "{exp_line}");
}
