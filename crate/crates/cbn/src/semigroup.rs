//! The reference semigroup: explicit Gaussian-mixture evaluation of
//! `P_t f`, closed-form moment oracles for the catalyst masses, inverse
//! occupation moments, and finite-difference probes of the derivative
//! scaling.
//!
//! The degenerate coordinates (N_R) enter `P_t f` only through a Gaussian
//! whose mean and variance are functionals of the remaining coordinates:
//! conditionally on the exogenous block, each N_R coordinate at time t is
//! normal with mean `x_j + b0_j t` and variance `2 gamma0_j I_t^{(j)}`,
//! `I_t^{(j)}` the occupation integral of the catalyst mass.  The inner
//! Gaussian integral is done analytically per test-function factor, which
//! removes one Monte Carlo layer entirely.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::FrozenCoefficients;
use crate::error::{Error, Result};
use crate::feller::{path_sample, FellerParams};
use crate::network::InitialClassification;
use crate::rng::path_rng;
use crate::stats::{log_log_slope, Estimate, RunningStats};
use crate::testfn::{gauss_hermite, TestFunction};

/// Monte Carlo parameters for semigroup evaluations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Path-skeleton steps for the occupation integrals.
    pub n_steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps: 256,
            seed,
        }
    }
}

/// Catalyst vertices of each N_R coordinate, indexed like `cls.n_r`.
pub fn nr_catalysts(cls: &InitialClassification) -> Vec<Vec<usize>> {
    cls.n_r
        .iter()
        .map(|&j| {
            (1..=cls.dim())
                .filter(|&i| cls.rbar_of(i).contains(&j))
                .collect()
        })
        .collect()
}

/// Evaluate the conditional expectation G: integrate the N_R factors of
/// `f` against Gaussians with mean `x_j + b0_j t` and variance
/// `2 gamma0_j y_j`, and evaluate the remaining factors at `z`.
///
/// `y_nr` is indexed like `cls.n_r`; `z` is a full-dimension state whose
/// N_R entries are ignored.  Factors without a closed-form convolution
/// fall back to order-64 Gauss-Hermite quadrature.
pub fn eval_g(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    t: f64,
    x: &[f64],
    y_nr: &[f64],
    z: &[f64],
    f: &TestFunction,
) -> f64 {
    let mut value = f.scale;
    for v in 1..=cls.dim() {
        let factor = &f.factors[v - 1];
        if let Some(r) = cls.n_r.iter().position(|&j| j == v) {
            let mean = x[v - 1] + frozen.b0[v - 1] * t;
            let variance = 2.0 * frozen.gamma0[v - 1] * y_nr[r];
            value *= match factor.convolve_gaussian(mean, variance) {
                Some(g) => g,
                None => factor.convolve_gaussian_quadrature(mean, variance),
            };
        } else {
            value *= factor.eval(z[v - 1]);
        }
    }
    value
}

/// True when every N_R factor of `f` has a closed-form Gaussian
/// convolution, i.e. `eval_g` needs no quadrature fallback.
pub fn closed_form_available(cls: &InitialClassification, f: &TestFunction) -> bool {
    cls.n_r
        .iter()
        .all(|&j| f.factors[j - 1].convolve_gaussian(0.0, 1.0).is_some())
}

/// One draw of the exogenous (N_C2) block on [0, t]: endpoints and the
/// occupation integrals feeding each N_R coordinate.
#[derive(Debug, Clone)]
pub struct ExogenousDraw {
    /// Full-dimension endpoint; N_R entries are left at 0 and unused.
    pub endpoint: Vec<f64>,
    /// I_t^{(j)} indexed like `cls.n_r`.
    pub integrals_nr: Vec<f64>,
}

/// Sample the exogenous block by exact Feller path skeletons.
pub fn sample_exogenous<R: rand::Rng + ?Sized>(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    catalysts: &[Vec<usize>],
    x: &[f64],
    t: f64,
    n_steps: usize,
    rng: &mut R,
) -> ExogenousDraw {
    let d = cls.dim();
    let mut endpoint = vec![0.0; d];
    let mut coord_integrals = vec![0.0; d];
    for &i in &cls.n_c2() {
        let p = FellerParams {
            x: x[i - 1],
            b: frozen.b0[i - 1],
            gamma: frozen.gamma0[i - 1],
        };
        let path = path_sample(&p, t, n_steps, rng);
        endpoint[i - 1] = *path.values.last().unwrap();
        coord_integrals[i - 1] = path.integral;
    }
    let integrals_nr = catalysts
        .iter()
        .map(|c| c.iter().map(|&i| coord_integrals[i - 1]).sum())
        .collect();
    ExogenousDraw {
        endpoint,
        integrals_nr,
    }
}

fn check_point(cls: &InitialClassification, x: &[f64]) -> Result<()> {
    if x.len() != cls.dim() {
        return Err(Error::DimensionMismatch {
            expected: cls.dim(),
            got: x.len(),
        });
    }
    if !cls.in_s0(x)? {
        return Err(Error::StencilOutOfDomain(x.to_vec()));
    }
    Ok(())
}

/// Monte Carlo evaluation of `P_t f(x)` through the mixture
/// representation: sample the exogenous block, average `eval_g`.
pub fn pt_f(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    f: &TestFunction,
    cfg: &McConfig,
) -> Result<Estimate> {
    check_point(cls, x)?;
    if t == 0.0 {
        return Ok(Estimate {
            mean: f.eval(x),
            stderr: 0.0,
            n: cfg.n_paths,
        });
    }
    let catalysts = nr_catalysts(cls);
    let values: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.seed, k as u64);
            let draw = sample_exogenous(frozen, cls, &catalysts, x, t, cfg.n_steps, &mut rng);
            eval_g(frozen, cls, t, x, &draw.integrals_nr, &draw.endpoint, f)
        })
        .collect();
    Ok(Estimate::from_samples(&values))
}

/// `P_t g(x)` for an arbitrary bounded function: the inner Gaussian
/// integral over the N_R coordinates is done by tensor Gauss-Hermite
/// quadrature instead of a per-factor closed form.
pub fn pt_generic<F>(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    g: &F,
    cfg: &McConfig,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    check_point(cls, x)?;
    if t == 0.0 {
        return Ok(Estimate {
            mean: g(x),
            stderr: 0.0,
            n: cfg.n_paths,
        });
    }
    let catalysts = nr_catalysts(cls);
    let gh = gauss_hermite(64);
    let n_r = cls.n_r.clone();
    let values: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.seed, k as u64);
            let draw = sample_exogenous(frozen, cls, &catalysts, x, t, cfg.n_steps, &mut rng);
            let mut state = draw.endpoint.clone();
            // tensor quadrature over the N_R coordinates
            let mut acc = 0.0;
            let mut idx = vec![0usize; n_r.len()];
            loop {
                let mut weight = 1.0;
                for (r, &j) in n_r.iter().enumerate() {
                    let mean = x[j - 1] + frozen.b0[j - 1] * t;
                    let var = 2.0 * frozen.gamma0[j - 1] * draw.integrals_nr[r];
                    state[j - 1] = mean + (2.0 * var).sqrt() * gh.nodes[idx[r]];
                    weight *= gh.weights[idx[r]] / std::f64::consts::PI.sqrt();
                }
                acc += weight * g(&state);
                // advance the multi-index
                let mut carry = 0;
                while carry < idx.len() {
                    idx[carry] += 1;
                    if idx[carry] < gh.nodes.len() {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                }
                if carry == idx.len() {
                    break;
                }
            }
            acc
        })
        .collect();
    Ok(Estimate::from_samples(&values))
}

/// Closed-form first and second moments of the catalyst mass feeding one
/// N_R coordinate, and of its occupation integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOracles {
    /// E[sum over C_j of x_t].
    pub mean_sum: f64,
    /// E[(sum over C_j of x_t)^2].
    pub second_moment_sum: f64,
    /// E[(sum over C_j of (x_t - x_0))^2].
    pub second_moment_increment: f64,
    /// E[I_t^{(j)}].
    pub mean_integral: f64,
}

/// Evaluate the closed forms at (x, t) for a vertex j in N_R.
pub fn moment_oracles(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    j: usize,
) -> Result<MomentOracles> {
    let Some(r) = cls.n_r.iter().position(|&v| v == j) else {
        return Err(Error::NotInNR(j));
    };
    let catalysts = nr_catalysts(cls);
    let c_j = &catalysts[r];
    let sum_x: f64 = c_j.iter().map(|&i| x[i - 1]).sum();
    let sum_b: f64 = c_j.iter().map(|&i| frozen.b0[i - 1]).sum();
    let mean_sum = sum_x + sum_b * t;
    // independent coordinates: variance adds, (mean)^2 expands
    let var: f64 = c_j
        .iter()
        .map(|&i| {
            let g = frozen.gamma0[i - 1];
            2.0 * g * x[i - 1] * t + g * frozen.b0[i - 1] * t * t
        })
        .sum();
    let second_moment_sum = var + mean_sum * mean_sum;
    let second_moment_increment = var + (sum_b * t).powi(2);
    let mean_integral: f64 = c_j
        .iter()
        .map(|&i| x[i - 1] * t + 0.5 * frozen.b0[i - 1] * t * t)
        .sum();
    Ok(MomentOracles {
        mean_sum,
        second_moment_sum,
        second_moment_increment,
        mean_integral,
    })
}

/// One moment identity checked by Monte Carlo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub vertex: usize,
    pub identity: String,
    pub estimate: Estimate,
    pub oracle: f64,
    pub z: f64,
}

/// Monte Carlo cross-check of all four moment identities for every N_R
/// vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: f64,
    pub n_paths: usize,
    pub checks: Vec<MomentCheck>,
    /// Branching-rate multiplier applied inside the sampler only; 1.0 in
    /// normal operation, != 1.0 as a deliberate negative control.
    pub gamma_corruption: f64,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.z.abs() <= 4.0)
    }
}

/// Estimate the four moment functionals by exact-transition path sampling
/// and compare against the closed forms.  `gamma_corruption` scales the
/// branching rate in the sampler (not the oracle) to verify the check has
/// power.
pub fn verify_moments(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    cfg: &McConfig,
    gamma_corruption: f64,
) -> Result<MomentReport> {
    check_point(cls, x)?;
    let catalysts = nr_catalysts(cls);
    let mut checks = Vec::new();
    for (r, &j) in cls.n_r.iter().enumerate() {
        let oracle = moment_oracles(frozen, cls, x, t, j)?;
        let c_j = catalysts[r].clone();
        let sum_x: f64 = c_j.iter().map(|&i| x[i - 1]).sum();
        let samples: Vec<(f64, f64)> = if t == 0.0 {
            vec![(sum_x, 0.0); cfg.n_paths]
        } else {
            (0..cfg.n_paths)
                .into_par_iter()
                .map(|k| {
                    let mut rng = path_rng(cfg.seed, k as u64);
                    let mut sum_end = 0.0;
                    let mut integral = 0.0;
                    for &i in &c_j {
                        let p = FellerParams {
                            x: x[i - 1],
                            b: frozen.b0[i - 1],
                            gamma: frozen.gamma0[i - 1] * gamma_corruption,
                        };
                        let path = path_sample(&p, t, cfg.n_steps, &mut rng);
                        sum_end += path.values.last().unwrap();
                        integral += path.integral;
                    }
                    (sum_end, integral)
                })
                .collect()
        };
        let sums: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let squares: Vec<f64> = sums.iter().map(|s| s * s).collect();
        let increments: Vec<f64> = sums.iter().map(|s| (s - sum_x).powi(2)).collect();
        let integrals: Vec<f64> = samples.iter().map(|s| s.1).collect();
        for (name, data, reference) in [
            ("mean_sum", sums, oracle.mean_sum),
            ("second_moment_sum", squares, oracle.second_moment_sum),
            (
                "second_moment_increment",
                increments,
                oracle.second_moment_increment,
            ),
            ("mean_integral", integrals, oracle.mean_integral),
        ] {
            let estimate = Estimate::from_samples(&data);
            let z = estimate.z_against(reference);
            checks.push(MomentCheck {
                vertex: j,
                identity: name.to_string(),
                estimate,
                oracle: reference,
                z,
            });
        }
    }
    Ok(MomentReport {
        t,
        n_paths: cfg.n_paths,
        checks,
        gamma_corruption,
    })
}

/// One inverse-moment estimate with the shape of its theoretical bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InverseMomentEstimate {
    pub estimate: Estimate,
    /// t^{-p} * min over C_j of (t + x_i)^{-p}.
    pub bound_shape: f64,
    /// Ratio estimate / bound_shape; the fitted constant.
    pub fitted_c: f64,
    /// Winsorization floor applied to the sampled integrals.
    pub winsor_floor: f64,
}

/// Monte Carlo estimate of E[(I_t^{(j)})^{-p}].
///
/// The integrand is heavy-tailed as the integral approaches zero; samples
/// are winsorized from below at their 1e-6 empirical quantile and the
/// floor is reported.  Requires strictly positive immigration on every
/// catalyst, otherwise the moment may be infinite.
pub fn inverse_moment_probe(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    j: usize,
    p: f64,
    cfg: &McConfig,
) -> Result<InverseMomentEstimate> {
    check_point(cls, x)?;
    let Some(r) = cls.n_r.iter().position(|&v| v == j) else {
        return Err(Error::NotInNR(j));
    };
    let catalysts = nr_catalysts(cls);
    let c_j = catalysts[r].clone();
    for &i in &c_j {
        if frozen.b0[i - 1] <= 0.0 {
            return Err(Error::PreconditionViolated(i));
        }
    }
    let mut integrals: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.seed, k as u64);
            c_j.iter()
                .map(|&i| {
                    let fp = FellerParams {
                        x: x[i - 1],
                        b: frozen.b0[i - 1],
                        gamma: frozen.gamma0[i - 1],
                    };
                    path_sample(&fp, t, cfg.n_steps, &mut rng).integral
                })
                .sum()
        })
        .collect();
    let mut sorted = integrals.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let q_idx = ((cfg.n_paths as f64) * 1e-6).ceil() as usize;
    let winsor_floor = sorted[q_idx.min(sorted.len() - 1)].max(f64::MIN_POSITIVE);
    for v in &mut integrals {
        *v = v.max(winsor_floor);
    }
    let inverses: Vec<f64> = integrals.iter().map(|v| v.powf(-p)).collect();
    let estimate = Estimate::from_samples(&inverses);
    let min_shift = c_j
        .iter()
        .map(|&i| t + x[i - 1])
        .fold(f64::INFINITY, f64::min);
    let bound_shape = t.powf(-p) * min_shift.powf(-p);
    Ok(InverseMomentEstimate {
        estimate,
        bound_shape,
        fitted_c: estimate.mean / bound_shape,
        winsor_floor,
    })
}

/// Inverse moments across a t-grid with the fitted log-log slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseMomentScaling {
    pub t_grid: Vec<f64>,
    pub points: Vec<InverseMomentEstimate>,
    /// Slope of log(estimate) against log(t); approximately -2p as t
    /// shrinks when the catalysts start at zero.
    pub slope: f64,
}

pub fn inverse_moment_scaling(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t_grid: &[f64],
    j: usize,
    p: f64,
    cfg: &McConfig,
) -> Result<InverseMomentScaling> {
    let mut points = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let sub = McConfig {
            seed: crate::rng::sub_seed(cfg.seed, &format!("invmom-{k}")),
            ..*cfg
        };
        points.push(inverse_moment_probe(frozen, cls, x, t, j, p, &sub)?);
    }
    let means: Vec<f64> = points.iter().map(|p| p.estimate.mean).collect();
    let slope = log_log_slope(t_grid, &means);
    Ok(InverseMomentScaling {
        t_grid: t_grid.to_vec(),
        points,
        slope,
    })
}

/// Coupled finite-difference stencil of `P_t f` along one coordinate.
///
/// For an N_R coordinate the shift enters the Gaussian mean analytically,
/// so all three points share every sampled path.  For an exogenous
/// coordinate the stencil is coupled additively: the branching property
/// splits the process started at `x_v + h` into the process started at
/// `x_v` plus an independent immigration-free process started at `h`, so
/// the three points share the base path and differ by independent
/// increment paths.  Differences are taken per path before averaging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StencilEstimates {
    pub coord: usize,
    /// Coordinate values of the three stencil points.
    pub points: [f64; 3],
    /// P_t f at the middle point.
    pub value: Estimate,
    /// Central first difference at the middle point.
    pub first: Estimate,
    /// Central second difference at the middle point.
    pub second: Estimate,
}

pub fn pt_f_stencil(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    t: f64,
    f: &TestFunction,
    coord: usize,
    h: f64,
    cfg: &McConfig,
) -> Result<StencilEstimates> {
    check_point(cls, x)?;
    assert!(h > 0.0 && t > 0.0);
    let catalysts = nr_catalysts(cls);
    let in_nr = cls.in_n_r(coord);
    // exogenous coordinates must stay nonnegative
    let lo = if in_nr || x[coord - 1] >= h {
        x[coord - 1] - h
    } else {
        x[coord - 1]
    };
    let points = [lo, lo + h, lo + 2.0 * h];
    // N_R indices whose catalyst set contains the shifted coordinate
    let affected: Vec<usize> = catalysts
        .iter()
        .enumerate()
        .filter(|(_, c)| c.contains(&coord))
        .map(|(r, _)| r)
        .collect();

    let triples: Vec<[f64; 3]> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = path_rng(cfg.seed, k as u64);
            let mut base_x = x.to_vec();
            base_x[coord - 1] = lo;
            let base = sample_exogenous(frozen, cls, &catalysts, &base_x, t, cfg.n_steps, &mut rng);
            if in_nr {
                let mut out = [0.0; 3];
                let mut xs = base_x.clone();
                for (s, &pt) in points.iter().enumerate() {
                    xs[coord - 1] = pt;
                    out[s] = eval_g(frozen, cls, t, &xs, &base.integrals_nr, &base.endpoint, f);
                }
                out
            } else {
                // two independent mass-h immigration-free increments
                let inc_params = FellerParams {
                    x: h,
                    b: 0.0,
                    gamma: frozen.gamma0[coord - 1],
                };
                let mut endpoint = base.endpoint.clone();
                let mut integrals = base.integrals_nr.clone();
                let mut out = [0.0; 3];
                out[0] = eval_g(frozen, cls, t, &base_x, &integrals, &endpoint, f);
                for s in 1..3 {
                    let inc = path_sample(&inc_params, t, cfg.n_steps, &mut rng);
                    endpoint[coord - 1] += inc.values.last().unwrap();
                    for &r in &affected {
                        integrals[r] += inc.integral;
                    }
                    out[s] = eval_g(frozen, cls, t, &base_x, &integrals, &endpoint, f);
                }
                out
            }
        })
        .collect();

    let mut value = RunningStats::new();
    let mut first = RunningStats::new();
    let mut second = RunningStats::new();
    for tr in &triples {
        value.push(tr[1]);
        first.push((tr[2] - tr[0]) / (2.0 * h));
        second.push((tr[2] - 2.0 * tr[1] + tr[0]) / (h * h));
    }
    Ok(StencilEstimates {
        coord,
        points,
        value: value.estimate(),
        first: first.estimate(),
        second: second.estimate(),
    })
}

/// Derivative magnitudes across a t-grid for one coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordScaling {
    pub coord: usize,
    pub first_abs: Vec<f64>,
    pub first_stderr: Vec<f64>,
    /// Weighted second difference |w * second|, w the relevant degenerate
    /// state factor (x_i for exogenous i, the largest catalyst value for
    /// N_R coordinates).
    pub second_weighted: Vec<f64>,
    /// Fitted log-log slope of the first-difference magnitude in t.
    pub first_slope: f64,
    /// sup over the grid of t * weighted second difference.
    pub second_t_sup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeScalingReport {
    pub t_grid: Vec<f64>,
    pub fd_step: f64,
    pub coords: Vec<CoordScaling>,
}

/// Probe the time scaling of first and second derivatives of `P_t f` by
/// coupled finite differences.  Slopes are diagnostic: the theoretical
/// constants are not pinned, only the exponents.
pub fn derivative_scaling_probe(
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    f: &TestFunction,
    x: &[f64],
    t_grid: &[f64],
    fd_step_rel: f64,
    cfg: &McConfig,
) -> Result<DerivativeScalingReport> {
    check_point(cls, x)?;
    let catalysts = nr_catalysts(cls);
    let mut coords = Vec::new();
    for v in 1..=cls.dim() {
        let h = fd_step_rel.max(fd_step_rel * x[v - 1]);
        let weight = if let Some(r) = cls.n_r.iter().position(|&j| j == v) {
            catalysts[r]
                .iter()
                .map(|&i| x[i - 1])
                .fold(0.0f64, f64::max)
        } else {
            x[v - 1]
        };
        let mut first_abs = Vec::new();
        let mut first_stderr = Vec::new();
        let mut second_weighted = Vec::new();
        let mut second_t_sup: f64 = 0.0;
        for (k, &t) in t_grid.iter().enumerate() {
            let sub = McConfig {
                seed: crate::rng::sub_seed(cfg.seed, &format!("fd-{v}-{k}")),
                ..*cfg
            };
            let st = pt_f_stencil(frozen, cls, x, t, f, v, h, &sub)?;
            first_abs.push(st.first.mean.abs());
            first_stderr.push(st.first.stderr);
            let w2 = (weight * st.second.mean).abs();
            second_weighted.push(w2);
            second_t_sup = second_t_sup.max(t * w2);
        }
        let floor = 1e-12 * f.bound().max(1.0);
        let clipped: Vec<f64> = first_abs.iter().map(|v| v.max(floor)).collect();
        let first_slope = log_log_slope(t_grid, &clipped);
        coords.push(CoordScaling {
            coord: v,
            first_abs,
            first_stderr,
            second_weighted,
            first_slope,
            second_t_sup,
        });
    }
    Ok(DerivativeScalingReport {
        t_grid: t_grid.to_vec(),
        fd_step: fd_step_rel,
        coords,
    })
}
