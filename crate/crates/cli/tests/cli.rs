use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn matfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn inequality_sweep_passes_and_prints_table() {
    let out = matfield(&["verify-inequalities", "--trials", "1000", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("trial"));
    assert!(stdout.trim_end().ends_with("PASS"));
    assert!(stdout.contains("failures=0"));
}

#[test]
fn json_report_records_config_and_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let out = matfield(&[
        "verify-equivalence",
        "--trials",
        "200",
        "--seed",
        "7",
        "--quiet",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["mode"], "verify-equivalence");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["trials"], 200);
    assert_eq!(report["tolerances"]["equivalence"], 1e-9);
    assert_eq!(report["trials"].as_array().unwrap().len(), 200);
    assert!(report["aggregate"]["max_discrepancy"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["passed"], true);
}

#[test]
fn reports_are_reproducible_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = matfield(&["oracle-compare", "--budget", "300", "--trials", "3", "--seed", "11", "-q", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v["aggregate"]["wall_time_s"] = Value::Null;
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn config_file_with_explicit_instance() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{
  "power": 2.0,
  "budget": 50,
  "instance": {
    "kind": "point-to-point",
    "h": [[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]],
    "noise_cov": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
    "weights": [[[[2, 0], [0, 0]], [[0, 0], [1, 0]]]],
    "pi": [[[0.1, 0], [0, 0]], [[0, 0], [0.1, 0]]]
  }
}"#,
    )
    .unwrap();
    let csv = dir.path().join("r.csv");
    for mode in ["design-trace", "design-det"] {
        let out = matfield(&[mode, "--config", config.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stdout));
        let text = fs::read_to_string(&csv).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("index,label,objective_structured"));
    }
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, "{\n  \"trials\": 3,\n  \"dims\": {\"n_tx\": 2, \"n_rx\": 2, \"n_dat\": 2, \"m\": \"two\"}\n}").unwrap();
    let out = matfield(&["design-trace", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 3"), "{stderr}");
    assert!(stderr.contains("dims.m"), "{stderr}");

    let out = matfield(&["design-trace", "--trials", "0"]);
    assert_eq!(code(&out), 2);

    let out = matfield(&["design-trace", "--config", "/nonexistent/c.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn singular_pi_is_numerical_unless_jittered() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{
  "instance": {
    "kind": "point-to-point",
    "h": [[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]],
    "noise_cov": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
    "weights": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]],
    "pi": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]
  }
}"#,
    )
    .unwrap();
    let path = config.to_str().unwrap();
    assert_eq!(code(&matfield(&["design-det", "--config", path])), 3);
    assert_eq!(code(&matfield(&["design-det", "--config", path, "--jitter-pi"])), 0);
    assert_eq!(code(&matfield(&["design-trace", "--config", path])), 0);
}

#[test]
fn failing_invariant_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    // Exact equality in floating point is not reachable for every aligned pair.
    fs::write(&config, r#"{"dims": {"n_tx": 4, "n_rx": 1, "n_dat": 1, "m": 1}, "tolerances": {"inequality": 0.0}}"#).unwrap();
    let out = matfield(&["verify-inequalities", "--config", config.to_str().unwrap(), "--trials", "200", "--seed", "1"]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL (inequ"), "{stdout}");
    assert!(stdout.trim_end().ends_with("FAIL"));
}

#[test]
fn every_subcommand_runs() {
    for mode in [
        "design-trace",
        "design-det",
        "relay-mse",
        "relay-capacity",
        "verify-inequalities",
        "verify-equivalence",
        "demo-schur",
    ] {
        let out = matfield(&[mode, "--trials", "2", "--seed", "5", "-q"]);
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = matfield(&["oracle-compare", "--trials", "1", "--budget", "100", "-q"]);
    assert_eq!(code(&out), 0);
}
