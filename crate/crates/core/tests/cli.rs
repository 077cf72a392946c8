use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conoma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_scenario(dir: &Path, seed: &str) -> String {
    let path = dir.join("scenario.json");
    let out = conoma(&["scenario", "--seed", seed, "--alpha", "0.9", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Two sweep points, two drops, one convergence trace on a 2 x 2 grid.
const SMALL_STUDY: &str = r#"{
  "drops": 2,
  "layout": {
    "rows": 2, "cols": 2, "ap_spacing": 2.5, "room_width": 5.0, "room_length": 5.0,
    "ceiling_height": 3.0, "receiver_height": 0.85, "strong_disc_fraction": 0.4
  },
  "rth_sweep": {"values": [1000000.0, 3000000.0], "alpha": 0.7},
  "alpha_sweep": {"values": [0.5, 0.95], "r_th": 1000000.0},
  "convergence": {"alphas": [0.95]}
}"#;

#[test]
fn solve_writes_feasible_solution() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "4");
    let out_dir = dir.path().join("out");
    let out = conoma(&["solve", &scenario, "--rth", "1e6", "--out-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let solution = read_json(&out_dir.join("solution.json"));
    assert_eq!(solution["scheme"], "conoma-opt");
    assert_eq!(solution["feasible_cells"].as_array().unwrap().len(), 16);
    assert!(String::from_utf8_lossy(&out.stdout).contains("feasible cells  16/16"));
}

#[test]
fn noma_fixed_never_relays() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "8");
    let out_dir = dir.path().join("out");
    let out = conoma(&[
        "solve",
        &scenario,
        "--scheme",
        "noma-fixed",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let solution = read_json(&out_dir.join("solution.json"));
    let x = solution["state"]["x"].as_array().unwrap();
    assert_eq!(x.len(), 16);
    assert!(x.iter().all(|v| v == 0));
    let p_max = 0.36;
    let p = solution["state"]["p"].as_array().unwrap();
    assert!(p.iter().all(|v| (v.as_f64().unwrap() - p_max).abs() < 1e-12));
}

#[test]
fn malformed_scenario_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\n  \"ap_positions\": [\n    {\"x\": 1.0,, \"y\": 2.0}\n  ]\n}\n").unwrap();
    let out = conoma(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("broken.json"), "{err}");
}

#[test]
fn unreachable_target_exits_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "2");
    let out_dir = dir.path().join("out");
    let out = conoma(&[
        "solve",
        &scenario,
        "--rth",
        "1e9",
        "--scheme",
        "conoma-fixed",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(out_dir.join("solution.json").is_file());
}

#[test]
fn unknown_scheme_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "2");
    let out = conoma(&["solve", &scenario, "--scheme", "noma-best"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("noma-best"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.json");
    fs::write(&path, r#"{"drops": 2, "optimizer": {"epsilon": 1e-4, "max_round": 6}}"#).unwrap();
    let out = conoma(&["experiment", "--config", path.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("max_round"), "{}", stderr(&out));
}

#[test]
fn drops_override_is_recorded_and_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    fs::write(&config, SMALL_STUDY).unwrap();
    let first = dir.path().join("first");
    let out = conoma(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--drops",
        "5",
        "--out-dir",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = read_json(&first.join("manifest.json"));
    assert_eq!(manifest["config"]["drops"], 5);
    assert!(manifest["overrides"].as_array().unwrap().iter().any(|o| o == "drops=5"));
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 5);

    let second = dir.path().join("second");
    let out = conoma(&[
        "--threads",
        "1",
        "experiment",
        "--manifest",
        first.join("manifest.json").to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let outputs: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .filter(|name| name.ends_with(".csv"))
        .collect();
    assert_eq!(outputs.len(), 5);
    for name in outputs {
        let a = fs::read(first.join(&name)).unwrap();
        let b = fs::read(second.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn validate_is_reproducible() {
    let run = || conoma(&["validate", "--seed", "7", "--instances", "40", "--grid", "4000"]);
    let a = run();
    let b = run();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 9);
}

#[test]
fn defaults_round_trip_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = conoma(&["defaults"]);
    assert!(out.status.success());
    let path = dir.path().join("defaults.json");
    fs::write(&path, &out.stdout).unwrap();
    let config = read_json(&path);
    assert_eq!(config["drops"], 200);
    assert!(config["provenance"]["n_v"].is_string());
    let scenario = dir.path().join("s.json");
    let out = conoma(&["scenario", "--config", path.to_str().unwrap(), "--out", scenario.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}
