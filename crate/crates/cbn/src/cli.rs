//! Thin batch front door: JSON config in, JSON + CSV reports out.
//!
//! Subcommands delegate to the library modules; the only flags are
//! `--config`, `--seed` (override), `--out` (override) and `--threads`.
//! Exit codes: 0 success, 1 check failure, 2 config error, 3 internal
//! error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::coeff::freeze;
use crate::config::{RunConfig, Validated};
use crate::error::{Error, Result};
use crate::norms::norm_report;
use crate::report::{fmt_f64, write_csv, Report};
use crate::resolvent::{r_lambda, ResolventConfig, Target};
use crate::rng::sub_seed;
use crate::sde::{lemma5_monitor, simulate, SdeSystem, SimConfig};
use crate::semigroup::{pt_f, verify_moments, McConfig};
use crate::stats::Estimate;
use crate::testfn::TestFunction;
use crate::verify::{default_grid, standard_family, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_INTERNAL_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cbn", version, about = "Catalytic branching network toolkit")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker thread count; results are independent of it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Classify the initial point into its degeneracy structure.
    Classify,
    /// Simulate the general SDE system with the state-space monitor.
    Simulate,
    /// Evaluate the reference semigroup on a family of test functions.
    Semigroup,
    /// Check the closed-form moment identities by Monte Carlo.
    Moments,
    /// Weighted-seminorm / semigroup-norm comparison.
    Norms,
    /// Monte Carlo resolvent across a rate grid.
    Resolvent,
    /// Run the full verification suite.
    Verify,
}

/// Entry point for the binary: parse arguments from the environment and
/// return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path too
            let code = if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    if let Some(threads) = cli.threads {
        // ignore the error when a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let config = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let validated = match config.validate() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| validated.config.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cbn-out"));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("config error: cannot create output directory: {e}");
        return EXIT_CONFIG_ERROR;
    }
    match dispatch(cli.command, &validated, &out_dir) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::two_catalyst_default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Map library errors onto the exit-code contract: statistical/runtime
/// conditions are check failures, malformed inputs are config errors, and
/// everything else is internal.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } | Error::Divergence(_) => EXIT_CHECK_FAILED,
        Error::SelfLoop(_)
        | Error::OutOfRange(..)
        | Error::DimensionMismatch { .. }
        | Error::FrozenDegenerate(_)
        | Error::Config(_)
        | Error::EmptyGrid
        | Error::BadDisplacement(..)
        | Error::NotInNR(_)
        | Error::PreconditionViolated(_)
        | Error::StencilOutOfDomain(_)
        | Error::DegenerateFamily => EXIT_CONFIG_ERROR,
        _ => EXIT_INTERNAL_ERROR,
    }
}

fn dispatch(command: Command, v: &Validated, out: &Path) -> Result<i32> {
    match command {
        Command::Classify => cmd_classify(v, out),
        Command::Simulate => cmd_simulate(v, out),
        Command::Semigroup => cmd_semigroup(v, out),
        Command::Moments => cmd_moments(v, out),
        Command::Norms => cmd_norms(v, out),
        Command::Resolvent => cmd_resolvent(v, out),
        Command::Verify => cmd_verify(v, out),
    }
}

fn family_for(v: &Validated, explicit: &Option<Vec<TestFunction>>, n: usize) -> Vec<TestFunction> {
    match explicit {
        Some(fns) => fns.clone(),
        None => {
            // put the closed-form factor on a degenerate coordinate when
            // one exists, otherwise on vertex 1
            let coord = v.cls.n_r.first().copied().unwrap_or(1);
            standard_family(v.cls.dim(), coord, n)
        }
    }
}

fn cmd_classify(v: &Validated, out: &Path) -> Result<i32> {
    let payload = serde_json::to_value(&v.cls)?;
    Report::new(&v.config, v.config.seed, payload).write(&out.join("classify.json"))?;
    Ok(EXIT_OK)
}

fn cmd_simulate(v: &Validated, out: &Path) -> Result<i32> {
    let p = &v.config.simulate;
    let sys = SdeSystem {
        net: v.net.clone(),
        field: v.config.coefficients.clone(),
    };
    let mut cfg = SimConfig::new(p.dt, p.horizon, p.n_paths, sub_seed(v.config.seed, "simulate"));
    cfg.store_knots = p.store_knots;
    let ens = simulate(&sys, &v.config.x0, &cfg)?;
    let monitor = lemma5_monitor(&ens, 1e-12);
    let d = v.cls.dim();
    let endpoint: Vec<Estimate> = (1..=d)
        .map(|i| Estimate::from_samples(&ens.final_coordinate(i)))
        .collect();
    let payload = json!({
        "sim": { "dt": p.dt, "horizon": p.horizon, "n_paths": p.n_paths },
        "endpoint_means": endpoint,
        "state_space_monitor": monitor,
    });
    Report::new(&v.config, v.config.seed, payload).write(&out.join("simulate.json"))?;

    let mut header: Vec<String> = vec!["path".into()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.push("min_s_product".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = ens
        .paths
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut row = vec![k.to_string()];
            row.extend(p.final_state.iter().map(|x| fmt_f64(*x)));
            row.push(fmt_f64(p.min_s_product));
            row
        })
        .collect();
    write_csv(&out.join("simulate_final_states.csv"), &header_refs, &rows)?;
    Ok(EXIT_OK)
}

fn cmd_semigroup(v: &Validated, out: &Path) -> Result<i32> {
    let p = &v.config.semigroup;
    let frozen = freeze(&v.config.coefficients, &v.net, &v.cls)?;
    let fns = family_for(v, &p.functions, 5);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (i, f) in fns.iter().enumerate() {
        let cfg = McConfig {
            n_paths: p.n_paths,
            n_steps: p.n_steps,
            seed: sub_seed(v.config.seed, &format!("semigroup-{i}")),
        };
        let est = pt_f(&frozen, &v.cls, &v.config.x0, p.t, f, &cfg)?;
        rows.push(vec![
            i.to_string(),
            fmt_f64(est.mean),
            fmt_f64(est.stderr),
            fmt_f64(f.bound()),
        ]);
        results.push(json!({
            "function": f,
            "estimate": est,
        }));
    }
    let payload = json!({
        "t": p.t, "n_paths": p.n_paths, "results": results,
    });
    Report::new(&v.config, v.config.seed, payload).write(&out.join("semigroup.json"))?;
    write_csv(
        &out.join("semigroup.csv"),
        &["function", "mean", "stderr", "sup_bound"],
        &rows,
    )?;
    Ok(EXIT_OK)
}

fn cmd_moments(v: &Validated, out: &Path) -> Result<i32> {
    let p = &v.config.moments;
    let frozen = freeze(&v.config.coefficients, &v.net, &v.cls)?;
    let mut all_pass = true;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (ti, &t) in p.times.iter().enumerate() {
        let cfg = McConfig {
            n_paths: p.n_paths,
            n_steps: 256,
            seed: sub_seed(v.config.seed, &format!("moments-{ti}")),
        };
        let rep = verify_moments(&frozen, &v.cls, &v.config.x0, t, &cfg, p.gamma_corruption)?;
        all_pass &= rep.passed();
        for c in &rep.checks {
            rows.push(vec![
                fmt_f64(t),
                c.vertex.to_string(),
                c.identity.clone(),
                fmt_f64(c.estimate.mean),
                fmt_f64(c.estimate.stderr),
                fmt_f64(c.oracle),
                fmt_f64(c.z),
            ]);
        }
        reports.push(serde_json::to_value(&rep)?);
    }
    let payload = json!({
        "n_paths": p.n_paths,
        "gamma_corruption": p.gamma_corruption,
        "passed": all_pass,
        "reports": reports,
    });
    Report::new(&v.config, v.config.seed, payload).write(&out.join("moments.json"))?;
    write_csv(
        &out.join("moments.csv"),
        &["t", "vertex", "identity", "estimate", "stderr", "oracle", "z"],
        &rows,
    )?;
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_norms(v: &Validated, out: &Path) -> Result<i32> {
    let p = &v.config.norms;
    let frozen = freeze(&v.config.coefficients, &v.net, &v.cls)?;
    let fns = family_for(v, &p.functions, 5);
    let grid = default_grid(&v.cls, p.alpha)?;
    let t_grid = [0.25, 0.5, 1.0];
    let x0 = v.config.x0.clone();
    let x1: Vec<f64> = x0.iter().map(|u| u + 0.1).collect();
    let x_grid = vec![x0, x1];
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut all_finite = true;
    for (i, f) in fns.iter().enumerate() {
        let mc = McConfig {
            n_paths: p.n_paths,
            n_steps: 256,
            seed: sub_seed(v.config.seed, &format!("norms-{i}")),
        };
        let rep = norm_report(f, &frozen, &v.cls, &grid, &t_grid, &x_grid, &mc)?;
        all_finite &= rep.ratio.is_finite() && rep.ratio > 0.0;
        rows.push(vec![
            i.to_string(),
            fmt_f64(rep.weak_norm),
            fmt_f64(rep.full_norm),
            fmt_f64(rep.semigroup.value),
            fmt_f64(rep.ratio),
        ]);
        results.push(serde_json::to_value(&rep)?);
    }
    let payload = json!({
        "alpha": p.alpha, "n_paths": p.n_paths,
        "all_ratios_finite": all_finite,
        "results": results,
    });
    Report::new(&v.config, v.config.seed, payload).write(&out.join("norms.json"))?;
    write_csv(
        &out.join("norms.csv"),
        &["function", "weak_norm", "full_norm", "semigroup_norm", "ratio"],
        &rows,
    )?;
    Ok(if all_finite { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_resolvent(v: &Validated, out: &Path) -> Result<i32> {
    let p = &v.config.resolvent;
    let frozen = freeze(&v.config.coefficients, &v.net, &v.cls)?;
    let f = family_for(v, &None, 1).remove(0);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (li, &lambda) in p.lambdas.iter().enumerate() {
        let cfg = ResolventConfig {
            seed: sub_seed(v.config.seed, &format!("resolvent-{li}")),
            ..ResolventConfig::new(lambda, p.n_paths, v.config.seed)
        };
        let est = r_lambda(Target::Closed(&f), &frozen, &v.cls, &v.config.x0, &cfg)?;
        rows.push(vec![
            fmt_f64(lambda),
            fmt_f64(est.estimate.mean),
            fmt_f64(est.estimate.stderr),
            fmt_f64(est.tail_bound),
        ]);
        results.push(serde_json::to_value(&est)?);
    }
    let payload = json!({
        "function": f, "n_paths": p.n_paths, "results": results,
    });
    Report::new(&v.config, v.config.seed, payload).write(&out.join("resolvent.json"))?;
    write_csv(
        &out.join("resolvent.csv"),
        &["lambda", "mean", "stderr", "tail_bound"],
        &rows,
    )?;
    Ok(EXIT_OK)
}

fn cmd_verify(v: &Validated, out: &Path) -> Result<i32> {
    let suite = Suite::new(v.config.seed, &v.config.verify);
    let report = suite.run_all();
    let payload = serde_json::to_value(&report)?;
    Report::new(&v.config, v.config.seed, payload).write(&out.join("verify.json"))?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.id.to_string(),
                c.name.clone(),
                c.passed.to_string(),
                c.insufficient_power.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("verify.csv"),
        &["id", "name", "passed", "insufficient_power"],
        &rows,
    )?;
    for c in &report.checks {
        let status = if c.ok() {
            "pass"
        } else if c.insufficient_power {
            "fail (insufficient power)"
        } else {
            "fail"
        };
        println!("check {}: {} ... {status}", c.id, c.name);
    }
    Ok(if report.all_passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_default_config(dir: &Path) -> PathBuf {
        let path = dir.join("config.json");
        let cfg = RunConfig::two_catalyst_default();
        std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        path
    }

    #[test]
    fn classify_writes_expected_sets() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_default_config(dir.path());
        let code = main_with_args([
            "cbn",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "classify",
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(dir.path().join("classify.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["payload"]["n_r"], serde_json::json!([2]));
        assert_eq!(v["payload"]["n_c"], serde_json::json!([1, 3]));
        assert!(v["meta"]["config_hash"].is_string());
    }

    #[test]
    fn classify_outside_state_space_still_exits_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.x0 = vec![0.0, 0.0, 0.0];
        let path = dir.path().join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let code = main_with_args([
            "cbn",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "classify",
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(dir.path().join("classify.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["payload"]["in_s"], serde_json::json!(false));
    }

    #[test]
    fn malformed_edges_exit_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.network.edges.push((1, 1));
        let path = dir.path().join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let code = main_with_args([
            "cbn",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "classify",
        ]);
        assert_eq!(code, EXIT_CONFIG_ERROR);
    }

    #[test]
    fn missing_config_file_exit_config_error() {
        let code = main_with_args(["cbn", "--config", "/nonexistent/cfg.json", "classify"]);
        assert_eq!(code, EXIT_CONFIG_ERROR);
    }

    #[test]
    fn seed_override_changes_hash_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_default_config(dir.path());
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        for (out, seed) in [(&out1, "1"), (&out2, "2")] {
            let code = main_with_args([
                "cbn",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "--out",
                out.to_str().unwrap(),
                "classify",
            ]);
            assert_eq!(code, EXIT_OK);
        }
        let a = std::fs::read_to_string(out1.join("classify.json")).unwrap();
        let b = std::fs::read_to_string(out2.join("classify.json")).unwrap();
        let va: serde_json::Value = serde_json::from_str(&a).unwrap();
        let vb: serde_json::Value = serde_json::from_str(&b).unwrap();
        assert_ne!(va["meta"]["config_hash"], vb["meta"]["config_hash"]);
        assert_eq!(va["meta"]["master_seed"], serde_json::json!(1));
    }

    #[test]
    fn simulate_writes_json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.simulate.n_paths = 20;
        cfg.simulate.dt = 1e-2;
        let path = dir.path().join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let code = main_with_args([
            "cbn",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "simulate",
        ]);
        assert_eq!(code, EXIT_OK);
        let csv = std::fs::read_to_string(dir.path().join("simulate_final_states.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path,x_1,x_2,x_3,min_s_product");
        assert_eq!(lines.len(), 21);
    }

    #[test]
    fn moments_corruption_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.moments.n_paths = 30_000;
        cfg.moments.times = vec![1.0];
        cfg.moments.gamma_corruption = 1.5;
        let path = dir.path().join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let code = main_with_args([
            "cbn",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "moments",
        ]);
        assert_eq!(code, EXIT_CHECK_FAILED);
    }

    #[test]
    fn moments_clean_exits_zero() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.moments.n_paths = 30_000;
        cfg.moments.times = vec![0.5];
        let path = dir.path().join("config.json");
        std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let code = main_with_args([
            "cbn",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "moments",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(dir.path().join("moments.csv").exists());
    }
}
