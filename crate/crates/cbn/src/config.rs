//! JSON run configuration: one file per run, schema-validated before any
//! computation starts.
//!
//! Every section has documented defaults; the fully resolved config (with
//! defaults filled in) is embedded in each output file's metadata, so a
//! report is always interpretable without the original config file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::network::{BranchingNetwork, InitialClassification};
use crate::testfn::TestFunction;

/// Network section: vertex count and catalyst -> reactant edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub d: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Parameters of the `simulate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateParams {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub store_knots: bool,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 1000,
            store_knots: false,
        }
    }
}

/// Parameters of the `semigroup` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemigroupParams {
    pub t: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Explicit test functions; when absent a standard family matched to
    /// the network dimension is used.
    pub functions: Option<Vec<TestFunction>>,
}

impl Default for SemigroupParams {
    fn default() -> Self {
        Self {
            t: 1.0,
            n_paths: 20_000,
            n_steps: 256,
            functions: None,
        }
    }
}

/// Parameters of the `moments` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentsParams {
    pub times: Vec<f64>,
    pub n_paths: usize,
    /// Branching-rate corruption applied to the sampler only; 1.0 means
    /// none.  Used to demonstrate the power of the moment checks.
    pub gamma_corruption: f64,
}

impl Default for MomentsParams {
    fn default() -> Self {
        Self {
            times: vec![0.5, 1.0],
            n_paths: 100_000,
            gamma_corruption: 1.0,
        }
    }
}

/// Parameters of the `norms` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormsParams {
    pub alpha: f64,
    pub n_paths: usize,
    pub functions: Option<Vec<TestFunction>>,
}

impl Default for NormsParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n_paths: 2000,
            functions: None,
        }
    }
}

/// Parameters of the `resolvent` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolventParams {
    pub lambdas: Vec<f64>,
    pub n_paths: usize,
}

impl Default for ResolventParams {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 4.0, 16.0, 64.0],
            n_paths: 4000,
        }
    }
}

/// Parameters of the `verify` subcommand (the full acceptance suite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyParams {
    /// Path-count multiplier applied to every check; values well below 1
    /// make the suite fast but underpowered, which the report flags
    /// distinctly from genuine failures.
    pub scale: f64,
    /// When set, the moment-check sampler runs with this branching-rate
    /// corruption, so the suite should fail (a mutation/power probe).
    pub mutate_gamma: Option<f64>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            mutate_gamma: None,
        }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub coefficients: CoefficientField,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; overridable with --out.
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub semigroup: SemigroupParams,
    #[serde(default)]
    pub moments: MomentsParams,
    #[serde(default)]
    pub norms: NormsParams,
    #[serde(default)]
    pub resolvent: ResolventParams,
    #[serde(default)]
    pub verify: VerifyParams,
}

impl RunConfig {
    /// A ready-to-run config on the two-catalyst network frozen at the
    /// fully degenerate point; the default subject of the toolkit.
    pub fn two_catalyst_default() -> Self {
        Self {
            network: NetworkSpec {
                d: 3,
                edges: vec![(1, 2), (3, 2)],
            },
            coefficients: CoefficientField::constant(3, 1.0, 1.0),
            x0: vec![0.0, 1.0, 0.0],
            seed: 0,
            out_dir: None,
            simulate: SimulateParams::default(),
            semigroup: SemigroupParams::default(),
            moments: MomentsParams::default(),
            norms: NormsParams::default(),
            resolvent: ResolventParams::default(),
            verify: VerifyParams::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(Error::from)
    }

    /// Schema and consistency validation; errors carry JSON-pointer-style
    /// paths into the config document.
    pub fn validate(&self) -> Result<Validated> {
        let d = self.network.d;
        if d == 0 {
            return Err(Error::Config("/network/d: must be at least 1".into()));
        }
        for (k, &(i, j)) in self.network.edges.iter().enumerate() {
            if i == j {
                return Err(Error::Config(format!(
                    "/network/edges/{k}: self-loop at vertex {i}"
                )));
            }
            for v in [i, j] {
                if v < 1 || v > d {
                    return Err(Error::Config(format!(
                        "/network/edges/{k}: endpoint {v} outside 1..={d}"
                    )));
                }
            }
        }
        let net = BranchingNetwork::new(d, self.network.edges.iter().copied())?;
        if self.coefficients.dim() != d {
            return Err(Error::Config(format!(
                "/coefficients: {} vertices declared, network has {d}",
                self.coefficients.dim()
            )));
        }
        if self.coefficients.gamma.len() != d {
            return Err(Error::Config(format!(
                "/coefficients/gamma: {} entries, network has {d}",
                self.coefficients.gamma.len()
            )));
        }
        if !(self.coefficients.alpha > 0.0 && self.coefficients.alpha < 1.0) {
            return Err(Error::Config(format!(
                "/coefficients/alpha: {} not in (0, 1)",
                self.coefficients.alpha
            )));
        }
        if self.x0.len() != d {
            return Err(Error::Config(format!(
                "/x0: length {} does not match network dimension {d}",
                self.x0.len()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "/x0: coordinates must be finite and nonnegative".into(),
            ));
        }
        if !(self.simulate.dt > 0.0 && self.simulate.dt <= self.simulate.horizon) {
            return Err(Error::Config(format!(
                "/simulate/dt: {} must be positive and at most the horizon {}",
                self.simulate.dt, self.simulate.horizon
            )));
        }
        for (name, n) in [
            ("/simulate/n_paths", self.simulate.n_paths),
            ("/semigroup/n_paths", self.semigroup.n_paths),
            ("/moments/n_paths", self.moments.n_paths),
            ("/norms/n_paths", self.norms.n_paths),
            ("/resolvent/n_paths", self.resolvent.n_paths),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name}: must be at least 1")));
            }
        }
        if !(self.norms.alpha > 0.0 && self.norms.alpha < 1.0) {
            return Err(Error::Config(format!(
                "/norms/alpha: {} not in (0, 1)",
                self.norms.alpha
            )));
        }
        for (k, l) in self.resolvent.lambdas.iter().enumerate() {
            if !(*l > 0.0) {
                return Err(Error::Config(format!(
                    "/resolvent/lambdas/{k}: {l} must be positive"
                )));
            }
        }
        if !(self.verify.scale > 0.0) {
            return Err(Error::Config(format!(
                "/verify/scale: {} must be positive",
                self.verify.scale
            )));
        }
        if let Some(c) = self.verify.mutate_gamma {
            if !(c > 0.0) {
                return Err(Error::Config(format!(
                    "/verify/mutate_gamma: {c} must be positive"
                )));
            }
        }
        for (section, fns) in [
            ("/semigroup/functions", &self.semigroup.functions),
            ("/norms/functions", &self.norms.functions),
        ] {
            if let Some(fns) = fns {
                for (k, f) in fns.iter().enumerate() {
                    if f.dim() != d {
                        return Err(Error::Config(format!(
                            "{section}/{k}: {} factors, network has {d} vertices",
                            f.dim()
                        )));
                    }
                }
            }
        }
        let cls = net.classify_initial(&self.x0)?;
        Ok(Validated {
            config: self.clone(),
            net,
            cls,
        })
    }
}

/// A validated config with the derived network and classification.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: RunConfig,
    pub net: BranchingNetwork,
    pub cls: InitialClassification,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        let v = RunConfig::two_catalyst_default().validate().unwrap();
        assert_eq!(v.cls.n_r, vec![2]);
        assert_eq!(v.cls.n_c, vec![1, 3]);
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::two_catalyst_default();
        let s = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let s = r#"{
            "network": {"d": 1, "edges": []},
            "coefficients": {
                "b": [{"kind": "constant", "value": 1.0}],
                "gamma": [{"kind": "constant", "value": 1.0}],
                "alpha": 0.5,
                "growth_c": 1.0
            },
            "x0": [1.0]
        }"#;
        let cfg: RunConfig = serde_json::from_str(s).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.moments.times, vec![0.5, 1.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn malformed_edges_pointer_path() {
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.network.edges.push((2, 2));
        match cfg.validate() {
            Err(Error::Config(msg)) => assert!(msg.starts_with("/network/edges/2")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatches_rejected() {
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.x0 = vec![0.0, 1.0];
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.starts_with("/x0")));

        let mut cfg = RunConfig::two_catalyst_default();
        cfg.coefficients.b.pop();
        assert!(
            matches!(cfg.validate(), Err(Error::Config(m)) if m.starts_with("/coefficients"))
        );
    }

    #[test]
    fn bad_scalars_rejected() {
        let mut cfg = RunConfig::two_catalyst_default();
        cfg.simulate.dt = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::two_catalyst_default();
        cfg.norms.alpha = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::two_catalyst_default();
        cfg.resolvent.lambdas = vec![1.0, -2.0];
        assert!(
            matches!(cfg.validate(), Err(Error::Config(m)) if m.starts_with("/resolvent/lambdas/1"))
        );
    }
}
