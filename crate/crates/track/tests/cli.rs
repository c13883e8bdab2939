//! Exit codes and outputs of the `track` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn track(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_track"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert!(track(&["--help"]).status.success());
    assert!(track(&["run", "--help"]).status.success());
    assert!(track(&["--version"]).status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(track(&[]).status.code(), Some(1));
    assert_eq!(track(&["run"]).status.code(), Some(1));
    assert_eq!(track(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn full_run_writes_csv() {
    let out = tempfile::tempdir().unwrap();
    let o = track(&[
        "run",
        "--scenario",
        arg(&scenarios().join("seven_robots.json")),
        "--out",
        arg(out.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let robots = fs::read_to_string(out.path().join("robots.csv")).unwrap();
    let target = fs::read_to_string(out.path().join("target.csv")).unwrap();
    assert_eq!(robots.lines().count(), 1 + 7 * 150);
    assert_eq!(target.lines().count(), 1 + 150);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["steps"], 150);
}

#[test]
fn distributed_json_run_with_oracle_check() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("short.json");
    let text = fs::read_to_string(scenarios().join("seven_robots.json"))
        .unwrap()
        .replace(r#"{"synthetic": {"steps": 150}}"#, r#"{"synthetic": {"steps": 3}}"#);
    fs::write(&scenario, text).unwrap();
    let out = dir.path().join("out");
    let o = track(&[
        "run",
        "--scenario",
        arg(&scenario),
        "--mode",
        "distributed",
        "--oracle-check",
        "--out",
        arg(&out),
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trajectory.json")).unwrap()).unwrap();
    assert_eq!(log["records"].as_array().unwrap().len(), 3);
    assert_eq!(log["summary"]["messages"]["messages_total"], 3 * 2000 * 4 * 8);
    assert!(log["summary"]["max_oracle_deviation"].as_f64().unwrap() <= 0.05);
}

#[test]
fn bad_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"graph": {"nodes": 2}}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        track(&["run", "--scenario", arg(&bad), "--out", arg(&out)])
            .status
            .code(),
        Some(1)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(track(&["certify", "--scenario", arg(&missing)]).status.code(), Some(1));
}

#[test]
fn solver_failure_exits_three() {
    // a huge primal step makes the iteration blow up
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("diverging.json");
    let text = fs::read_to_string(scenarios().join("seven_robots.json"))
        .unwrap()
        .replace(r#""alpha": 0.01"#, r#""alpha": 50"#);
    fs::write(&scenario, text).unwrap();
    let out = dir.path().join("out");
    let o = track(&["run", "--scenario", arg(&scenario), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step 1"));
}

#[test]
fn default_step_sizes_are_not_certified() {
    let o = track(&["certify", "--scenario", arg(&scenarios().join("seven_robots.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["verdict"], "uncertified");
    assert_eq!(cert["f_phi_source"], "estimated");
    assert!(cert["alpha_bound"].as_f64().unwrap() < 0.01);
}

#[test]
fn small_steps_are_certified() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("small.json");
    let text = fs::read_to_string(scenarios().join("seven_robots.json"))
        .unwrap()
        .replace(r#""alpha": 0.01"#, r#""alpha": 0.0001"#)
        .replace(r#""beta": 0.2"#, r#""beta": 0.1"#);
    fs::write(&scenario, text).unwrap();
    let o = track(&["certify", "--scenario", arg(&scenario)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn weight_validation() {
    let graph = scenarios().join("ring_graph.json");
    assert!(track(&["validate-weights", "--graph", arg(&graph)]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("w.json");
    // identity: nonzero row sums
    let rows: Vec<Vec<f64>> = (0..7)
        .map(|i| (0..7).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    fs::write(&bad, serde_json::to_string(&rows).unwrap()).unwrap();
    let o = track(&["validate-weights", "--graph", arg(&graph), "--matrix", arg(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["zero_sums"], false);
    fs::write(&bad, "[[1, 0], [0]]").unwrap();
    assert_eq!(
        track(&["validate-weights", "--graph", arg(&graph), "--matrix", arg(&bad)])
            .status
            .code(),
        Some(1)
    );
}
