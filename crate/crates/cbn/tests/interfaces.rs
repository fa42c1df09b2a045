//! External-interface contract: JSON config and classification formats,
//! CSV table shapes, metadata fields, and exit codes of the binary.

use std::path::Path;
use std::process::Command;

use cbn::config::RunConfig;

fn run(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_cbn"))
        .args(args)
        .status()
        .expect("binary should spawn")
        .code()
        .unwrap_or(-1)
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn classify_json_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_config(dir.path(), &RunConfig::two_catalyst_default());
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg_path, "--out", out, "classify"]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("classify.json")).unwrap())
            .unwrap();
    // metadata contract
    for key in ["toolkit_version", "config_hash", "master_seed", "wall_clock_secs"] {
        assert!(v["meta"].get(key).is_some(), "missing meta.{key}");
    }
    // resolved config with defaults embedded
    assert_eq!(v["config"]["moments"]["n_paths"], serde_json::json!(100_000));
    // classification payload
    assert_eq!(v["payload"]["n_r"], serde_json::json!([2]));
    assert_eq!(v["payload"]["n_c"], serde_json::json!([1, 3]));
    assert_eq!(v["payload"]["n_2"], serde_json::json!([]));
    assert_eq!(v["payload"]["in_s"], serde_json::json!(true));
}

#[test]
fn config_schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    // malformed JSON
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "--out", out, "classify"]), 2);

    // schema violation: x0 length
    let mut cfg = RunConfig::two_catalyst_default();
    cfg.x0 = vec![0.0];
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run(&["--config", &path, "--out", out, "classify"]), 2);
}

#[test]
fn semigroup_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::two_catalyst_default();
    cfg.semigroup.n_paths = 200;
    let cfg_path = write_config(dir.path(), &cfg);
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg_path, "--out", out, "semigroup"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("semigroup.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "function,mean,stderr,sup_bound");
    assert_eq!(lines.len(), 6, "header plus five default functions");
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        for f in &fields[1..] {
            f.parse::<f64>().expect("numeric field");
        }
    }
}

#[test]
fn resolvent_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::two_catalyst_default();
    cfg.resolvent.n_paths = 100;
    cfg.resolvent.lambdas = vec![2.0, 8.0];
    let cfg_path = write_config(dir.path(), &cfg);
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg_path, "--out", out, "resolvent"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("resolvent.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,mean,stderr,tail_bound");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,"));
    assert!(lines[2].starts_with("8,"));
}

#[test]
fn explicit_test_functions_round_trip() {
    // a config-supplied function reaches the semigroup subcommand
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::two_catalyst_default();
    cfg.semigroup.n_paths = 200;
    let json = serde_json::json!([{
        "scale": 2.0,
        "factors": [
            {"kind": "one"},
            {"kind": "cos", "freq": 1.0, "phase": 0.0},
            {"kind": "one"}
        ]
    }]);
    cfg.semigroup.functions = Some(serde_json::from_value(json).unwrap());
    let cfg_path = write_config(dir.path(), &cfg);
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["--config", &cfg_path, "--out", out, "semigroup"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("semigroup.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "one explicit function");
    let sup: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(sup, 2.0);
}
