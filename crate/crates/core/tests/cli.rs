use std::path::Path;
use std::process::Command;

use gmshadow::cli::run_command;

fn cmd(args: &[&str]) -> i32 {
    run_command(std::iter::once("gmshadow").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn classify_prints_json() {
    let out = Command::new(env!("CARGO_BIN_EXE_gmshadow"))
        .args(["classify", "-p", "3", "-q", "1", "-r", "1", "-s", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["anti_turing"], true);
    assert_eq!(report["turing"], false);
}

#[test]
fn classify_rejects_invalid_params() {
    assert_eq!(cmd(&["classify", "-p", "0.5", "-q", "1", "-r", "1", "-s", "0"]), 1);
    assert_eq!(cmd(&["classify", "-p", "2", "-q", "1", "-r", "1", "-s", "-2"]), 1);
}

#[test]
fn missing_config_is_a_config_error() {
    assert_eq!(cmd(&["run", "--config", "missing.toml"]), 1);
    assert_eq!(cmd(&["run"]), 1);
    assert_eq!(cmd(&["frobnicate"]), 1);
}

#[test]
fn run_writes_schema_stable_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cmd(&["run", "--preset", "ode-blowup", "--out", out]), 0);
    let run_dir = dir.path().join("ode-blowup");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    let mut keys: Vec<&str> = summary.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["blowup_report", "params", "records_path", "regime", "scenario", "snapshots", "termination", "violations"]
    );
    assert_eq!(summary["termination"]["event"], "blow-up-suspected");
    assert_eq!(summary["blowup_report"]["detected"], true);
    let csv = std::fs::read_to_string(run_dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with(gmshadow::output::TRAJECTORY_HEADER));
    assert!(run_dir.join("snapshots").join("t=0.csv").exists());
}

#[test]
fn config_file_overlays_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        r#"
name = "short"
preset = "small-rho-global"
[time]
t_end = 0.5
"#,
    );
    let out = dir.path().join("runs");
    assert_eq!(cmd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    assert!(out.join("short").join("summary.json").exists());
}

#[test]
fn hypothesis_failure_blocks_checked_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        r#"
name = "gentle"
preset = "variational-blowup"
[initial]
type = "cosine"
base = 1.0
amplitude = 0.1
"#,
    );
    let out = dir.path().to_str().unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_gmshadow"))
            .args(["run", "--config", &cfg, "--out", out])
            .args(extra)
            .output()
            .unwrap()
    };
    // Data near u = 1 has J(u0) > 0, outside the preset's hypotheses.
    let checked = run(&[]);
    assert_eq!(checked.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&checked.stderr).contains("J(u0)"));
    assert!(!dir.path().join("gentle").exists());
    let mut cfg_short = std::fs::read_to_string(&cfg).unwrap();
    cfg_short.push_str("[time]\nt_end = 0.2\n");
    std::fs::write(&cfg, cfg_short).unwrap();
    assert_eq!(run(&["--unchecked"]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "f.json",
        r#"{
  "name": "starved",
  "params": {"p": 3, "q": 1, "r": 1, "s": 0},
  "geometry": {"kind": "interval", "length": 1.0, "points": 33},
  "initial": {"type": "constant", "value": 0.5},
  "integrator": {"scheme": "imex", "dt_min": 0.9},
  "time": {"t_end": 1.0}
}"#,
    );
    let out = dir.path().join("runs");
    assert_eq!(cmd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
    let summary = std::fs::read_to_string(out.join("starved").join("summary.json")).unwrap();
    assert!(summary.contains("numerical-failure"));
}

#[test]
fn spectrum_and_presets() {
    assert_eq!(cmd(&["presets"]), 0);
    assert_eq!(cmd(&["spectrum", "--preset", "turing-instability", "-k", "4"]), 0);
    assert_eq!(cmd(&["spectrum", "--preset", "nope"]), 1);
}

#[test]
fn sweep_is_independent_of_job_count() {
    use gmshadow::cli::{run_sweep, SweepAxis};
    let base = gmshadow::scenario::preset("ode-blowup").unwrap();
    let axes = [
        SweepAxis::parse("initial.value=0.8:1.6:3").unwrap(),
        SweepAxis::parse("params.q=0.5:1:2").unwrap(),
    ];
    let one = run_sweep(&base, &axes, Some(1), None).unwrap();
    let four = run_sweep(&base, &axes, Some(4), None).unwrap();
    assert_eq!(one.len(), 6);
    assert_eq!(one, four);
}

#[test]
fn sweep_command_writes_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = cmd(&[
        "sweep",
        "--preset",
        "ode-blowup",
        "--vary",
        "initial.value=0.5:0.9:2",
        "--jobs",
        "2",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    assert!(dir.path().join("ode-blowup-0").join("summary.json").exists());
    assert!(dir.path().join("ode-blowup-1").join("summary.json").exists());
    assert_eq!(cmd(&["sweep", "--preset", "ode-blowup", "--vary", "bad"]), 1);
}
