//! Time-discretized simulation of the catalytic-network SDE system and of
//! the frozen reference diffusion, with state-space monitoring.
//!
//! The general system is advanced by full-truncation Euler, which keeps
//! every coordinate nonnegative.  The reference diffusion advances the
//! nonnegative coordinates by exact Feller transitions and the remaining
//! coordinates by conditionally Gaussian increments.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientField, FrozenCoefficients};
use crate::error::{Error, Result};
use crate::feller::{exact_transition_sample, FellerParams};
use crate::network::{BranchingNetwork, InitialClassification};
use crate::rng::path_rng;

/// Network plus coefficient field: everything defining the SDE system.
#[derive(Debug, Clone)]
pub struct SdeSystem {
    pub net: BranchingNetwork,
    pub field: CoefficientField,
}

/// Discretization and ensemble parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Keep the full knot arrays (memory-heavy); endpoints, integrals and
    /// the state-space monitor are always kept.
    #[serde(default)]
    pub store_knots: bool,
    /// Blow-up cap as a multiple of 1 + |x0|.
    #[serde(default = "default_cap_factor")]
    pub cap_factor: f64,
}

fn default_cap_factor() -> f64 {
    1e6
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        assert!(dt > 0.0 && dt <= horizon && n_paths >= 1);
        Self {
            dt,
            horizon,
            n_paths,
            seed,
            store_knots: false,
            cap_factor: default_cap_factor(),
        }
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }
}

/// One simulated path: endpoint, optional knots, occupation integrals for
/// the reactant coordinates, and the running minimum of the state-space
/// product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathRecord {
    pub final_state: Vec<f64>,
    /// Knot states, only when `store_knots` was set.
    pub knots: Vec<Vec<f64>>,
    /// Trapezoid integral of the catalyst mass feeding each reactant,
    /// indexed like `reactants`.
    pub integrals: Vec<f64>,
    pub min_s_product: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    /// Reactant vertices the `integrals` entries refer to.
    pub reactants: Vec<usize>,
    pub paths: Vec<PathRecord>,
}

impl PathEnsemble {
    pub fn final_coordinate(&self, i: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.final_state[i - 1]).collect()
    }
}

/// Drift vector and squared diffusion coefficients at a point.
pub fn drift_diffusion(
    net: &BranchingNetwork,
    field: &CoefficientField,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = net.dim();
    let mut drift = vec![0.0; d];
    let mut diff_sq = vec![0.0; d];
    for j in 1..=d {
        drift[j - 1] = field.b_at(j, x)?;
        let g = field.gamma_at(j, x)?;
        diff_sq[j - 1] = if net.is_reactant(j) {
            2.0 * g * net.catalyst_sum(j, x) * x[j - 1]
        } else {
            2.0 * g * x[j - 1]
        };
    }
    Ok((drift, diff_sq))
}

fn s_product(net: &BranchingNetwork, x: &[f64]) -> f64 {
    (1..=net.dim())
        .filter(|&j| net.is_reactant(j))
        .map(|j| net.catalyst_sum(j, x) + x[j - 1])
        .product()
}

/// Full-truncation Euler simulation of the general system.
pub fn simulate(sys: &SdeSystem, x0: &[f64], cfg: &SimConfig) -> Result<PathEnsemble> {
    let net = &sys.net;
    if x0.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: x0.len(),
        });
    }
    let n_steps = cfg.n_steps();
    let reactants = net.reactant_set();
    let cap = cfg.cap_factor * (1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt());
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * cfg.dt).collect();

    let paths: Result<Vec<PathRecord>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path_idx| {
            let mut rng = path_rng(cfg.seed, path_idx as u64);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut x = x0.to_vec();
            let mut knots = if cfg.store_knots {
                vec![x.clone()]
            } else {
                Vec::new()
            };
            let mut integrals = vec![0.0; reactants.len()];
            let mut min_prod = s_product(net, &x);
            let sqrt_dt = cfg.dt.sqrt();
            for step in 0..n_steps {
                let prev_sums: Vec<f64> = reactants
                    .iter()
                    .map(|&j| net.catalyst_sum(j, &x))
                    .collect();
                let (drift, diff_sq) = drift_diffusion(net, &sys.field, &x)?;
                for i in 0..x.len() {
                    let noise: f64 = normal.sample(&mut rng);
                    x[i] = (x[i] + drift[i] * cfg.dt + diff_sq[i].sqrt() * sqrt_dt * noise)
                        .max(0.0);
                    if x[i] > cap {
                        return Err(Error::BlowUp {
                            coord: i + 1,
                            cap,
                            step,
                        });
                    }
                }
                for (r, &j) in reactants.iter().enumerate() {
                    integrals[r] += 0.5 * (prev_sums[r] + net.catalyst_sum(j, &x)) * cfg.dt;
                }
                min_prod = min_prod.min(s_product(net, &x));
                if cfg.store_knots {
                    knots.push(x.clone());
                }
            }
            Ok(PathRecord {
                final_state: x,
                knots,
                integrals,
                min_s_product: min_prod,
            })
        })
        .collect();

    Ok(PathEnsemble {
        times,
        reactants,
        paths: paths?,
    })
}

/// Simulate the frozen reference diffusion on S0.
///
/// Coordinates outside N_R chain exact Feller transitions; N_R coordinates
/// receive Gaussian increments with conditional variance
/// `2 gamma0_j * (catalyst mass) * dt`, the catalyst mass taken as the
/// trapezoid average over the step.  No positivity is enforced on N_R.
pub fn simulate_a0(
    cls: &InitialClassification,
    frozen: &FrozenCoefficients,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    let d = cls.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let n_steps = cfg.n_steps();
    let n_c2 = cls.n_c2();
    let n_r = cls.n_r.clone();
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * cfg.dt).collect();

    // catalyst sets of the N_R coordinates, for the integrals
    let catalysts: Vec<Vec<usize>> = n_r
        .iter()
        .map(|&j| {
            // C_j consists of N_C coordinates; recover it from rbar
            (1..=d)
                .filter(|&i| cls.rbar_of(i).contains(&j))
                .collect()
        })
        .collect();

    let paths: Vec<PathRecord> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path_idx| {
            let mut rng = path_rng(cfg.seed, path_idx as u64);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut x = x0.to_vec();
            let mut knots = if cfg.store_knots {
                vec![x.clone()]
            } else {
                Vec::new()
            };
            let mut integrals = vec![0.0; n_r.len()];
            for _ in 0..n_steps {
                let prev = x.clone();
                for &i in &n_c2 {
                    let p = FellerParams {
                        x: prev[i - 1],
                        b: frozen.b0[i - 1],
                        gamma: frozen.gamma0[i - 1],
                    };
                    x[i - 1] = exact_transition_sample(&p, cfg.dt, &mut rng);
                }
                for (r, &j) in n_r.iter().enumerate() {
                    let sum_prev: f64 = catalysts[r].iter().map(|&i| prev[i - 1]).sum();
                    let sum_next: f64 = catalysts[r].iter().map(|&i| x[i - 1]).sum();
                    let avg = 0.5 * (sum_prev + sum_next);
                    integrals[r] += avg * cfg.dt;
                    let var = 2.0 * frozen.gamma0[j - 1] * avg * cfg.dt;
                    let noise: f64 = normal.sample(&mut rng);
                    x[j - 1] += frozen.b0[j - 1] * cfg.dt + var.sqrt() * noise;
                }
                if cfg.store_knots {
                    knots.push(x.clone());
                }
            }
            PathRecord {
                final_state: x,
                knots,
                integrals,
                min_s_product: f64::INFINITY,
            }
        })
        .collect();

    Ok(PathEnsemble {
        times,
        reactants: n_r,
        paths,
    })
}

/// Report of the state-space monitor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub n_paths: usize,
    pub threshold: f64,
    /// Paths whose running product minimum fell below the threshold.
    pub below_threshold: usize,
    /// Paths whose product hit exactly zero at some knot.
    pub exact_zero: usize,
}

/// Count paths whose state-space product came near or exactly to zero.
/// The continuous process never leaves S; discretization can still touch
/// zero, so counts are reported rather than asserted away.
pub fn lemma5_monitor(ens: &PathEnsemble, threshold: f64) -> Lemma5Report {
    let below = ens
        .paths
        .iter()
        .filter(|p| p.min_s_product < threshold)
        .count();
    let zero = ens
        .paths
        .iter()
        .filter(|p| p.min_s_product == 0.0)
        .count();
    Lemma5Report {
        n_paths: ens.paths.len(),
        threshold,
        below_threshold: below,
        exact_zero: zero,
    }
}
