//! Drive the batch front door programmatically: write a JSON config, run
//! the classify and moments subcommands, and read back the reports.
//!
//! Run with: cargo run --example batch_reports

use cbn::cli::main_with_args;
use cbn::config::RunConfig;

fn main() {
    let dir = std::env::temp_dir().join("cbn-batch-example");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("config.json");

    let mut cfg = RunConfig::two_catalyst_default();
    cfg.moments.n_paths = 20_000;
    cfg.moments.times = vec![0.5];
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    for sub in ["classify", "moments"] {
        let code = main_with_args([
            "cbn",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "42",
            sub,
        ]);
        println!("cbn {sub}: exit code {code}");
    }

    let text = std::fs::read_to_string(dir.join("moments.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    println!("moments passed: {}", v["payload"]["passed"]);
    println!("config hash: {}", v["meta"]["config_hash"]);
    println!("reports in {}", dir.display());
}
