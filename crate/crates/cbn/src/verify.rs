//! The end-to-end verification suite: nine numbered checks covering the
//! exact samplers, the moment and inverse-moment identities, the semigroup
//! representation, norm equivalence, the key contraction estimate, the
//! perturbation series, and the state-space monitors.
//!
//! Each check reports pass/fail plus an `insufficient_power` flag: runs
//! scaled down below the check's minimum path count are marked
//! underpowered, distinctly from genuine statistical failures.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coeff::{freeze, CoefficientField, Expr, FrozenCoefficients};
use crate::config::VerifyParams;
use crate::error::Result;
use crate::feller::{cluster_sample, exact_transition_sample, extinction_probability, FellerParams};
use crate::network::{BranchingNetwork, InitialClassification};
use crate::norms::{equivalence_check, GridSpec};
use crate::resolvent::{key_estimate_probe, perturbation_series, perturbed_resolvent_oracle, BoxGrid};
use crate::rng::{path_rng, sub_seed};
use crate::sde::{lemma5_monitor, simulate, SdeSystem, SimConfig};
use crate::semigroup::{inverse_moment_scaling, nr_catalysts, pt_f, verify_moments, McConfig};
use crate::stats::{binomial_stderr, combined_stderr, ks_two_sample, Estimate, RunningStats};
use crate::testfn::{Factor, TestFunction};

/// Outcome of one numbered check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// The run had fewer paths than the check needs for its tolerances;
    /// reported distinctly from a genuine failure.
    pub insufficient_power: bool,
    pub details: Value,
    pub wall_clock_secs: f64,
}

impl CheckResult {
    /// A check only counts when it passed at full power.
    pub fn ok(&self) -> bool {
        self.passed && !self.insufficient_power
    }
}

/// Full suite outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
    pub any_underpowered: bool,
}

/// The canonical two-catalyst fixture: network 1 -> 2 <- 3 with constant
/// unit coefficients, frozen at the fully degenerate point (0, 1, 0).
pub fn two_catalyst_fixture() -> (
    BranchingNetwork,
    InitialClassification,
    FrozenCoefficients,
    CoefficientField,
) {
    let net = BranchingNetwork::new(3, [(1, 2), (3, 2)]).unwrap();
    let cls = net.classify_initial(&[0.0, 1.0, 0.0]).unwrap();
    let field = CoefficientField::constant(3, 1.0, 1.0);
    let frozen = freeze(&field, &net, &cls).unwrap();
    (net, cls, frozen, field)
}

/// A localized field equal to the frozen constants plus a bump of size
/// `eps` on the degenerate branching rate: total perturbation `eps` near
/// the initial point.
pub fn near_frozen_tilde(eps: f64) -> CoefficientField {
    CoefficientField {
        b: vec![Expr::constant(1.0); 3],
        gamma: vec![
            Expr::constant(1.0),
            Expr::Bump {
                base: 1.0,
                amplitude: eps,
                center: vec![0.0, 1.0, 0.0],
                radius: 1.0,
            },
            Expr::constant(1.0),
        ],
        alpha: 0.5,
        growth_c: 1.0,
        constant_outside_radius: Some(2.0),
    }
}

/// A deterministic family of bounded test functions on a `d`-vertex
/// network; the factor on `closed_coord` (1-based) always has a
/// closed-form Gaussian convolution.
pub fn standard_family(d: usize, closed_coord: usize, n: usize) -> Vec<TestFunction> {
    let mut family = Vec::with_capacity(n);
    for k in 0..n {
        let mut factors = vec![Factor::One; d];
        let t = k as f64;
        factors[closed_coord - 1] = match k % 3 {
            0 => Factor::Cos {
                freq: 0.5 + 0.25 * t,
                phase: 0.1 * t,
            },
            1 => Factor::GaussBump {
                center: 0.5 + 0.1 * t,
                width: 0.6 + 0.05 * t,
            },
            _ => Factor::SmoothStep {
                center: 0.8 + 0.05 * t,
                width: 0.4 + 0.03 * t,
            },
        };
        // a second factor on another coordinate for half the family
        if d > 1 && k % 2 == 1 {
            let other = (1..=d).find(|&i| i != closed_coord).unwrap();
            factors[other - 1] = match (k / 2) % 2 {
                0 => Factor::ExpDecay { rate: 0.3 + 0.1 * t },
                _ => Factor::Cos {
                    freq: 1.0 + 0.1 * t,
                    phase: 0.2,
                },
            };
        }
        family.push(TestFunction {
            scale: 1.0,
            factors,
        });
    }
    family
}

/// A default weighted-seminorm grid around the classified initial point:
/// a few base points plus pure and mixed displacements for every
/// nondegenerate coordinate.
pub fn default_grid(cls: &InitialClassification, alpha: f64) -> Result<GridSpec> {
    let d = cls.dim();
    let x0 = &cls.x0;
    let shifted = |delta: f64| -> Vec<f64> { x0.iter().map(|v| v + delta).collect() };
    let base_points = vec![x0.clone(), shifted(0.1), shifted(0.25)];
    let mut displacements = Vec::new();
    for &i in &cls.n_c2() {
        for h in [0.1, 0.01] {
            let mut pure = vec![0.0; d];
            pure[i - 1] = h;
            displacements.push((i, pure));
        }
        if let Some(&j) = cls.rbar_of(i).first() {
            for h in [0.1, 0.02] {
                let mut mixed = vec![0.0; d];
                mixed[i - 1] = h;
                mixed[j - 1] = -0.5 * h;
                displacements.push((i, mixed));
            }
        }
    }
    GridSpec::new(cls, base_points, displacements, alpha)
}

/// One refinement step of [`default_grid`]: intermediate base points and
/// intermediate displacement magnitudes.
pub fn refined_grid(cls: &InitialClassification, grid: &GridSpec) -> Result<GridSpec> {
    let d = cls.dim();
    let x0 = &cls.x0;
    let extra_points = vec![
        x0.iter().map(|v| v + 0.05).collect(),
        x0.iter().map(|v| v + 0.175).collect(),
    ];
    let mut extra_disp = Vec::new();
    for &i in &cls.n_c2() {
        for h in [0.05, 0.02] {
            let mut pure = vec![0.0; d];
            pure[i - 1] = h;
            extra_disp.push((i, pure));
        }
        if let Some(&j) = cls.rbar_of(i).first() {
            let mut mixed = vec![0.0; d];
            mixed[i - 1] = 0.04;
            mixed[j - 1] = -0.02;
            extra_disp.push((i, mixed));
        }
    }
    grid.refined(cls, extra_points, extra_disp)
}

/// The five semigroup test functions of check 5.
pub fn five_functions() -> Vec<TestFunction> {
    let f = |factors: Vec<Factor>| TestFunction {
        scale: 1.0,
        factors,
    };
    vec![
        f(vec![
            Factor::One,
            Factor::Cos {
                freq: 1.0,
                phase: 0.3,
            },
            Factor::One,
        ]),
        f(vec![
            Factor::One,
            Factor::GaussBump {
                center: 1.0,
                width: 1.0,
            },
            Factor::One,
        ]),
        f(vec![
            Factor::ExpDecay { rate: 0.5 },
            Factor::SmoothStep {
                center: 1.0,
                width: 0.7,
            },
            Factor::One,
        ]),
        f(vec![
            Factor::One,
            Factor::Cos {
                freq: 2.0,
                phase: 0.0,
            },
            Factor::GaussBump {
                center: 0.5,
                width: 1.0,
            },
        ]),
        f(vec![
            Factor::Cos {
                freq: 1.0,
                phase: 0.2,
            },
            Factor::SmoothStep {
                center: 0.5,
                width: 0.5,
            },
            Factor::One,
        ]),
    ]
}

/// Suite driver: seed, path scale and the optional mutation flag.
pub struct Suite {
    pub seed: u64,
    pub scale: f64,
    pub mutate_gamma: Option<f64>,
}

impl Suite {
    pub fn new(seed: u64, params: &VerifyParams) -> Self {
        Self {
            seed,
            scale: params.scale,
            mutate_gamma: params.mutate_gamma,
        }
    }

    fn scaled(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(2)
    }

    fn run_check<F>(&self, id: u32, name: &str, min_paths: usize, base_paths: usize, f: F) -> CheckResult
    where
        F: FnOnce(usize) -> Result<(bool, Value)>,
    {
        let start = Instant::now();
        let n = self.scaled(base_paths);
        let underpowered = n < min_paths;
        let (passed, details) = match f(n) {
            Ok((passed, details)) => (passed, details),
            Err(e) => (false, json!({ "error": e.to_string() })),
        };
        CheckResult {
            id,
            name: name.to_string(),
            passed,
            insufficient_power: underpowered,
            details,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        }
    }

    /// Check 1: survival frequency of an immigration-free process matches
    /// the closed-form extinction law over a 3x3x3 parameter grid.
    pub fn check_extinction(&self) -> CheckResult {
        self.run_check(1, "extinction_law", 1000, 100_000, |n| {
            let vals = [0.5, 1.0, 2.0];
            let mut cells = Vec::new();
            let mut passed = true;
            let mut ci = 0usize;
            for &h in &vals {
                for &g in &vals {
                    for &t in &vals {
                        let seed = sub_seed(self.seed, &format!("c1-{ci}"));
                        ci += 1;
                        let survived = (0..n)
                            .into_par_iter()
                            .filter(|&k| {
                                let mut rng = path_rng(seed, k as u64);
                                let p = FellerParams { x: h, b: 0.0, gamma: g };
                                exact_transition_sample(&p, t, &mut rng) > 0.0
                            })
                            .count();
                        let freq = survived as f64 / n as f64;
                        let p = extinction_probability(h, g, t);
                        let z = (freq - p) / binomial_stderr(p, n);
                        passed &= z.abs() <= 3.0;
                        cells.push(json!({
                            "h": h, "gamma": g, "t": t,
                            "freq": freq, "expected": p, "z": z,
                        }));
                    }
                }
            }
            Ok((passed, json!({ "n_paths": n, "cells": cells })))
        })
    }

    /// Check 2: cluster-decomposition totals agree in law with the exact
    /// transition sampler (KS distance and zero-atom frequency).
    pub fn check_cluster(&self) -> CheckResult {
        self.run_check(2, "cluster_decomposition", 40_000, 100_000, |n| {
            let seed_a = sub_seed(self.seed, "c2-cluster");
            let seed_b = sub_seed(self.seed, "c2-exact");
            let cluster: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let mut rng = path_rng(seed_a, k as u64);
                    cluster_sample(1.0, 1.0, 1.0, &mut rng).total
                })
                .collect();
            let exact: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let mut rng = path_rng(seed_b, k as u64);
                    let p = FellerParams { x: 1.0, b: 0.0, gamma: 1.0 };
                    exact_transition_sample(&p, 1.0, &mut rng)
                })
                .collect();
            let ks = ks_two_sample(&cluster, &exact);
            let pa = cluster.iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
            let pb = exact.iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
            let pooled = 0.5 * (pa + pb);
            let se = (pooled * (1.0 - pooled) * 2.0 / n as f64).sqrt();
            let atom_ok = (pa - pb).abs() <= 3.0 * se;
            let passed = ks < 0.01 && atom_ok;
            Ok((
                passed,
                json!({
                    "n_paths": n, "ks": ks, "ks_bound": 0.01,
                    "zero_atom_cluster": pa, "zero_atom_exact": pb,
                    "zero_atom_se": se,
                }),
            ))
        })
    }

    /// Check 3: the four closed-form moment identities at t in {0.5, 1},
    /// plus a mutation probe demonstrating the check has power.
    pub fn check_moments(&self) -> CheckResult {
        self.run_check(3, "moment_identities", 10_000, 100_000, |n| {
            let (_, cls, frozen, _) = two_catalyst_fixture();
            let x0 = [0.0, 1.0, 0.0];
            let corruption = self.mutate_gamma.unwrap_or(1.0);
            let mut reports = Vec::new();
            let mut main_pass = true;
            for (ti, t) in [0.5, 1.0].into_iter().enumerate() {
                let cfg = McConfig {
                    n_paths: n,
                    n_steps: 256,
                    seed: sub_seed(self.seed, &format!("c3-{ti}")),
                };
                let rep = verify_moments(&frozen, &cls, &x0, t, &cfg, corruption)?;
                main_pass &= rep.passed();
                reports.push(serde_json::to_value(&rep)?);
            }
            // the gamma x1.5 mutation must break at least one identity
            let cfg = McConfig {
                n_paths: n,
                n_steps: 256,
                seed: sub_seed(self.seed, "c3-mutation"),
            };
            let probe = verify_moments(&frozen, &cls, &x0, 1.0, &cfg, 1.5)?;
            let mutation_detected = !probe.passed();
            Ok((
                main_pass && mutation_detected,
                json!({
                    "n_paths": n,
                    "gamma_corruption": corruption,
                    "reports": reports,
                    "mutation_detected": mutation_detected,
                }),
            ))
        })
    }

    /// Check 4: inverse-moment scaling E[(I_t)^{-1}] ~ c t^{-2} from a
    /// degenerate start, with a stable fitted constant.
    pub fn check_inverse_moment(&self) -> CheckResult {
        self.run_check(4, "inverse_moment_shape", 10_000, 100_000, |n| {
            let (_, cls, frozen, _) = two_catalyst_fixture();
            let cfg = McConfig {
                n_paths: n,
                n_steps: 256,
                seed: sub_seed(self.seed, "c4"),
            };
            let t_grid = [0.25, 0.5, 1.0, 2.0];
            let scaling =
                inverse_moment_scaling(&frozen, &cls, &[0.0, 1.0, 0.0], &t_grid, 2, 1.0, &cfg)?;
            let slope_ok = (scaling.slope + 2.0).abs() <= 0.3;
            let cs: Vec<f64> = scaling.points.iter().map(|p| p.fitted_c).collect();
            let spread = cs.iter().cloned().fold(f64::MIN, f64::max)
                / cs.iter().cloned().fold(f64::MAX, f64::min);
            let spread_ok = spread.is_finite() && spread <= 3.0;
            Ok((
                slope_ok && spread_ok,
                json!({
                    "n_paths": n, "slope": scaling.slope, "slope_target": -2.0,
                    "slope_tolerance": 0.3, "fitted_constants": cs,
                    "spread": spread, "spread_bound": 3.0,
                }),
            ))
        })
    }

    /// Check 5: the Gaussian-mixture semigroup evaluation agrees with the
    /// reference-diffusion simulator, with a coupled dt-halving bias probe.
    pub fn check_semigroup(&self) -> CheckResult {
        self.run_check(5, "semigroup_representation", 10_000, 100_000, |n| {
            let (_, cls, frozen, _) = two_catalyst_fixture();
            let x0 = [0.0, 1.0, 0.0];
            let t = 1.0;
            let fns = five_functions();
            let fine = simulate_reference(
                &cls,
                &frozen,
                &x0,
                t,
                1000,
                n,
                sub_seed(self.seed, "c5-sim"),
            );
            let gaps = coupled_discretization_gap(
                &cls,
                &frozen,
                &x0,
                t,
                &fns,
                self.scaled(20_000),
                500,
                sub_seed(self.seed, "c5-bias"),
            );
            let mut rows = Vec::new();
            let mut passed = true;
            for (i, f) in fns.iter().enumerate() {
                let cfg = McConfig {
                    n_paths: n,
                    n_steps: 256,
                    seed: sub_seed(self.seed, &format!("c5-pt-{i}")),
                };
                let pt = pt_f(&frozen, &cls, &x0, t, f, &cfg)?;
                let emp = Estimate::from_samples(
                    &fine.iter().map(|x| f.eval(x)).collect::<Vec<f64>>(),
                );
                let gap = gaps[i];
                // discretization bias upper bound must sit below one
                // stderr of the empirical mean
                let bias_bound = gap.mean.abs() + 3.0 * gap.stderr;
                let bias_ok = bias_bound < emp.stderr;
                let z = (pt.mean - emp.mean) / combined_stderr(&pt, &emp);
                let agree = z.abs() <= 3.0;
                passed &= bias_ok && agree;
                rows.push(json!({
                    "function": i, "pt": pt.mean, "pt_stderr": pt.stderr,
                    "empirical": emp.mean, "empirical_stderr": emp.stderr,
                    "z": z, "bias_bound": bias_bound, "bias_ok": bias_ok,
                }));
            }
            Ok((passed, json!({ "n_paths": n, "t": t, "functions": rows })))
        })
    }

    /// Check 6: semigroup-norm / weighted-seminorm ratios over a
    /// 20-function family are finite, tightly spread, and stable under
    /// grid refinement.
    pub fn check_norm_equivalence(&self) -> CheckResult {
        self.run_check(6, "norm_equivalence", 500, 2000, |n| {
            let (_, cls, frozen, _) = two_catalyst_fixture();
            let family = standard_family(3, 2, 20);
            let grid = default_grid(&cls, 0.5)?;
            let t_grid = [0.25, 0.5, 1.0];
            let x_grid = vec![vec![0.0, 1.0, 0.0], vec![0.1, 1.0, 0.1]];
            let mc = McConfig {
                n_paths: n,
                n_steps: 256,
                seed: sub_seed(self.seed, "c6"),
            };
            let rep = equivalence_check(
                &family, &frozen, &cls, &grid, &t_grid, &x_grid, &mc, 100.0,
            )?;
            let fine = refined_grid(&cls, &grid)?;
            let rep2 = equivalence_check(
                &family, &frozen, &cls, &fine, &t_grid, &x_grid, &mc, 100.0,
            )?;
            let max_change = rep
                .ratios
                .iter()
                .zip(&rep2.ratios)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1e-300))
                .fold(0.0f64, f64::max);
            let passed = rep.passed && rep2.passed && max_change <= 0.20;
            Ok((
                passed,
                json!({
                    "n_paths": n,
                    "ratios": rep.ratios, "min_ratio": rep.min_ratio,
                    "max_ratio": rep.max_ratio, "spread_bound": rep.spread_bound,
                    "refined_ratios": rep2.ratios,
                    "max_refinement_change": max_change,
                    "refinement_bound": 0.20,
                }),
            ))
        })
    }

    /// Check 7: the contraction ratio sup |B R_lambda f| / ||f|| is
    /// nonincreasing in lambda and at most 1/2 at lambda = 64 under a
    /// perturbation of size 0.05.
    pub fn check_key_estimate(&self) -> CheckResult {
        self.run_check(7, "key_estimate", 200, 800, |n| {
            let (net, cls, frozen, _) = two_catalyst_fixture();
            let tilde = near_frozen_tilde(0.05);
            let x_grid = vec![
                vec![0.0, 1.0, 0.0],
                vec![0.1, 1.0, 0.0],
                vec![0.0, 0.9, 0.1],
                vec![0.2, 1.1, 0.2],
            ];
            let lambdas = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
            let fns = vec![
                five_functions()[0].clone(),
                five_functions()[1].clone(),
                five_functions()[4].clone(),
            ];
            let mut per_fn = Vec::new();
            let mut passed = true;
            let mut first_fitted: Option<f64> = None;
            for (i, f) in fns.iter().enumerate() {
                let rep = key_estimate_probe(
                    f,
                    &tilde,
                    &frozen,
                    &net,
                    &cls,
                    &x_grid,
                    &lambdas,
                    n,
                    sub_seed(self.seed, &format!("c7-{i}")),
                )?;
                let eps_ok = rep.epsilon <= 0.05 + 1e-12;
                let mut monotone = true;
                for w in rep.points.windows(2) {
                    if w[1].ratio > w[0].ratio + w[0].noise + w[1].noise {
                        monotone = false;
                    }
                }
                let last = rep.points.last().unwrap();
                let contracts = last.ratio - last.noise <= 0.5;
                passed &= eps_ok && monotone && contracts;
                if first_fitted.is_none() {
                    first_fitted = rep.fitted_lambda1;
                }
                per_fn.push(json!({
                    "function": i,
                    "epsilon": rep.epsilon,
                    "points": serde_json::to_value(&rep.points)?,
                    "monotone": monotone,
                    "contracts_at_64": contracts,
                    "fitted_lambda1": rep.fitted_lambda1,
                }));
            }
            Ok((
                passed,
                json!({
                    "n_paths": n,
                    "functions": per_fn,
                    "fitted_lambda1": first_fitted,
                }),
            ))
        })
    }

    /// Check 8: the Neumann-type series decays geometrically and its
    /// partial sum matches the direct perturbed-diffusion oracle.
    pub fn check_series(&self, lambda: f64) -> CheckResult {
        self.run_check(8, "perturbation_series", 100, 400, |n| {
            let (net, cls, frozen, _) = two_catalyst_fixture();
            let tilde = near_frozen_tilde(0.05);
            let f = five_functions()[0].clone();
            let grid = BoxGrid::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0], vec![3, 5, 3]);
            let x = [0.0, 1.0, 0.0];
            let series = perturbation_series(
                &f,
                &tilde,
                &frozen,
                &net,
                &cls,
                &grid,
                &x,
                lambda,
                5,
                n,
                sub_seed(self.seed, "c8-series"),
            )?;
            let decay_ok = series.decay_ratios.iter().all(|r| *r <= 0.6);
            let horizon = (16.0 / lambda).clamp(1.0, 16.0);
            let oracle = perturbed_resolvent_oracle(
                &f,
                &tilde,
                &net,
                &cls,
                &x,
                lambda,
                5e-4,
                horizon,
                self.scaled(20_000),
                sub_seed(self.seed, "c8-oracle"),
            )?;
            let sum = *series.partial_sums.last().unwrap();
            let gap = (sum - oracle.estimate.mean).abs();
            let tol = 3.0
                * (series.partial_stderr.last().unwrap().powi(2)
                    + oracle.estimate.stderr.powi(2))
                .sqrt()
                + series.tail_bound
                + oracle.tail_bound
                + 0.01 * f.bound();
            let sum_ok = gap < tol;
            Ok((
                decay_ok && sum_ok,
                json!({
                    "n_paths": n, "lambda": lambda,
                    "term_norms": series.term_norms,
                    "decay_ratios": series.decay_ratios,
                    "decay_bound": 0.6,
                    "partial_sum": sum,
                    "oracle": oracle.estimate.mean,
                    "oracle_stderr": oracle.estimate.stderr,
                    "gap": gap, "tolerance": tol,
                }),
            ))
        })
    }

    /// Check 9: hypercycle paths stay in the state space — no exact-zero
    /// products, no negative knots.
    pub fn check_invariance(&self) -> CheckResult {
        self.run_check(9, "invariance_monitors", 100, 1000, |n| {
            let net = BranchingNetwork::new(4, [(1, 2), (2, 3), (3, 4), (4, 1)])?;
            let field = CoefficientField::constant(4, 1.0, 1.0);
            let sys = SdeSystem { net, field };
            let mut cfg = SimConfig::new(1e-3, 1.0, n, sub_seed(self.seed, "c9"));
            cfg.store_knots = true;
            let ens = simulate(&sys, &[1.0, 1.0, 1.0, 1.0], &cfg)?;
            let monitor = lemma5_monitor(&ens, 1e-12);
            let negative_knots = ens
                .paths
                .iter()
                .flat_map(|p| p.knots.iter())
                .flat_map(|k| k.iter())
                .filter(|v| **v < 0.0)
                .count();
            let passed = monitor.exact_zero == 0 && negative_knots == 0;
            Ok((
                passed,
                json!({
                    "n_paths": n,
                    "exact_zero_products": monitor.exact_zero,
                    "below_threshold": monitor.below_threshold,
                    "negative_knots": negative_knots,
                }),
            ))
        })
    }

    /// Run the whole suite in order, passing the fitted lambda from the
    /// key estimate into the series check.
    pub fn run_all(&self) -> VerifyReport {
        let mut checks = vec![
            self.check_extinction(),
            self.check_cluster(),
            self.check_moments(),
            self.check_inverse_moment(),
            self.check_semigroup(),
            self.check_norm_equivalence(),
        ];
        let key = self.check_key_estimate();
        let lambda = key
            .details
            .get("fitted_lambda1")
            .and_then(Value::as_f64)
            .unwrap_or(8.0)
            .max(4.0);
        checks.push(key);
        checks.push(self.check_series(lambda));
        checks.push(self.check_invariance());
        let all_passed = checks.iter().all(CheckResult::ok);
        let any_underpowered = checks.iter().any(|c| c.insufficient_power);
        VerifyReport {
            checks,
            all_passed,
            any_underpowered,
        }
    }
}

/// Final states of the reference diffusion via exact catalyst transitions
/// and conditionally Gaussian degenerate increments (the same scheme as
/// `sde::simulate_a0`, kept here with a configurable step count).
fn simulate_reference(
    cls: &InitialClassification,
    frozen: &FrozenCoefficients,
    x0: &[f64],
    t: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n_c2 = cls.n_c2();
    let n_r = cls.n_r.clone();
    let catalysts = nr_catalysts(cls);
    let dt = t / n_steps as f64;
    (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut x = x0.to_vec();
            for _ in 0..n_steps {
                let prev = x.clone();
                for &i in &n_c2 {
                    let p = FellerParams {
                        x: prev[i - 1],
                        b: frozen.b0[i - 1],
                        gamma: frozen.gamma0[i - 1],
                    };
                    x[i - 1] = exact_transition_sample(&p, dt, &mut rng);
                }
                for (r, &j) in n_r.iter().enumerate() {
                    let s_prev: f64 = catalysts[r].iter().map(|&i| prev[i - 1]).sum();
                    let s_next: f64 = catalysts[r].iter().map(|&i| x[i - 1]).sum();
                    let avg = 0.5 * (s_prev + s_next);
                    let var = 2.0 * frozen.gamma0[j - 1] * avg * dt;
                    let noise: f64 = normal.sample(&mut rng);
                    x[j - 1] += frozen.b0[j - 1] * dt + var.sqrt() * noise;
                }
            }
            x
        })
        .collect()
}

/// Coupled estimate of the dt-halving discretization gap.
///
/// Both resolutions share one exact catalyst path sampled at the fine
/// step; the coarse variant subsamples it (correct in law).  The
/// degenerate coordinates share Brownian increments, so only the
/// trapezoid weighting of the conditional variance differs.  Returns one
/// estimate of f(coarse endpoint) - f(fine endpoint) per function.
fn coupled_discretization_gap(
    cls: &InitialClassification,
    frozen: &FrozenCoefficients,
    x0: &[f64],
    t: f64,
    fns: &[TestFunction],
    n_paths: usize,
    n_coarse_steps: usize,
    seed: u64,
) -> Vec<Estimate> {
    let n_c2 = cls.n_c2();
    let n_r = cls.n_r.clone();
    let catalysts = nr_catalysts(cls);
    let dt = t / n_coarse_steps as f64;
    let dt_half = 0.5 * dt;
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut z = x0.to_vec();
            let mut coarse = x0.to_vec();
            let mut fine = x0.to_vec();
            for _ in 0..n_coarse_steps {
                let v0 = z.clone();
                for &i in &n_c2 {
                    let p = FellerParams {
                        x: z[i - 1],
                        b: frozen.b0[i - 1],
                        gamma: frozen.gamma0[i - 1],
                    };
                    z[i - 1] = exact_transition_sample(&p, dt_half, &mut rng);
                }
                let v1 = z.clone();
                for &i in &n_c2 {
                    let p = FellerParams {
                        x: z[i - 1],
                        b: frozen.b0[i - 1],
                        gamma: frozen.gamma0[i - 1],
                    };
                    z[i - 1] = exact_transition_sample(&p, dt_half, &mut rng);
                }
                let v2 = z.clone();
                for (r, &j) in n_r.iter().enumerate() {
                    let s0: f64 = catalysts[r].iter().map(|&i| v0[i - 1]).sum();
                    let s1: f64 = catalysts[r].iter().map(|&i| v1[i - 1]).sum();
                    let s2: f64 = catalysts[r].iter().map(|&i| v2[i - 1]).sum();
                    let g = frozen.gamma0[j - 1];
                    let b = frozen.b0[j - 1];
                    let n1: f64 = normal.sample(&mut rng);
                    let n2: f64 = normal.sample(&mut rng);
                    fine[j - 1] += b * dt
                        + (2.0 * g * 0.5 * (s0 + s1) * dt_half).sqrt() * n1
                        + (2.0 * g * 0.5 * (s1 + s2) * dt_half).sqrt() * n2;
                    coarse[j - 1] += b * dt
                        + (2.0 * g * 0.5 * (s0 + s2) * dt).sqrt()
                            * ((n1 + n2) / std::f64::consts::SQRT_2);
                }
            }
            // exogenous coordinates agree exactly in both variants
            for &i in &n_c2 {
                coarse[i - 1] = z[i - 1];
                fine[i - 1] = z[i - 1];
            }
            fns.iter().map(|f| f.eval(&coarse) - f.eval(&fine)).collect()
        })
        .collect();
    (0..fns.len())
        .map(|fi| {
            let mut acc = RunningStats::new();
            for row in &per_path {
                acc.push(row[fi]);
            }
            acc.estimate()
        })
        .collect()
}
