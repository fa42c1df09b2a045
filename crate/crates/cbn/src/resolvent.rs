//! Resolvent of the reference semigroup by time quadrature, the
//! perturbation operator B, the key contraction estimate, and the
//! Neumann-type perturbation series checked against a direct
//! perturbed-SDE oracle.
//!
//! `R_lambda f = int_0^inf e^{-lambda s} P_s f ds` is computed on a
//! geometric time grid with log-trapezoid weights; one path ensemble per
//! evaluation point is shared across every time node, so the quadrature
//! and the Monte Carlo layers do not multiply.  Derivatives of resolvent
//! values are taken by coupled finite differences: shifts of degenerate
//! coordinates move a Gaussian mean analytically, shifts of the exogenous
//! coordinates add independent immigration-free branching increments to
//! the same base paths.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientField, FrozenCoefficients};
use crate::error::{Error, Result};
use crate::feller::{exact_transition_sample, FellerParams};
use crate::network::{BranchingNetwork, InitialClassification};
use crate::rng::{path_rng, sub_seed};
use crate::semigroup::nr_catalysts;
use crate::stats::{Estimate, RunningStats};
use crate::testfn::{gauss_hermite, GaussHermite, TestFunction};

/// Parameters of the resolvent quadrature and its Monte Carlo layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventConfig {
    pub lambda: f64,
    /// Lower end of the geometric time grid; [0, t_min] is handled by the
    /// strong-continuity correction f(x) (1 - e^{-lambda t_min}) / lambda.
    pub t_min: f64,
    /// Upper end; the remainder is covered by the tail bound
    /// ||f|| e^{-lambda t_max} / lambda.
    pub t_max: f64,
    /// Geometric ratio of the time grid.
    pub ratio: f64,
    pub n_paths: usize,
    /// Refinement of each quadrature gap for the occupation integrals.
    pub substeps: usize,
    /// Gauss-Hermite order for functions without closed-form convolution.
    pub gh_order: usize,
    /// Relative finite-difference step for resolvent derivatives.
    pub fd_step: f64,
    pub seed: u64,
}

impl ResolventConfig {
    pub fn new(lambda: f64, n_paths: usize, seed: u64) -> Self {
        assert!(lambda > 0.0);
        Self {
            lambda,
            t_min: 1e-3,
            t_max: 16.0 / lambda,
            ratio: 1.25,
            n_paths,
            substeps: 4,
            gh_order: 32,
            fd_step: 1e-2,
            seed,
        }
    }
}

/// Geometric quadrature grid with log-trapezoid weights for
/// int_{t_min}^{t_max} phi(t) dt ~= sum w_k phi(t_k).
#[derive(Debug, Clone)]
pub struct TimeQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn time_quadrature(t_min: f64, t_max: f64, ratio: f64) -> TimeQuadrature {
    assert!(t_min > 0.0 && t_max > t_min && ratio > 1.0);
    let mut nodes = vec![t_min];
    while nodes.last().unwrap() * ratio < t_max {
        nodes.push(nodes.last().unwrap() * ratio);
    }
    if *nodes.last().unwrap() < t_max {
        nodes.push(t_max);
    }
    let us: Vec<f64> = nodes.iter().map(|t| t.ln()).collect();
    let n = nodes.len();
    let weights = (0..n)
        .map(|k| {
            let du = if k == 0 {
                (us[1] - us[0]) / 2.0
            } else if k == n - 1 {
                (us[n - 1] - us[n - 2]) / 2.0
            } else {
                (us[k + 1] - us[k - 1]) / 2.0
            };
            nodes[k] * du
        })
        .collect();
    TimeQuadrature { nodes, weights }
}

/// Tensor grid over a box in S0 with multilinear interpolation, clamped
/// to the box outside it.  Series terms live on such grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Nodes per dimension, each >= 2.
    pub shape: Vec<usize>,
}

impl BoxGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert_eq!(lo.len(), shape.len());
        assert!(shape.iter().all(|&n| n >= 2));
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b));
        Self { lo, hi, shape }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn axis(&self, d: usize, i: usize) -> f64 {
        let n = self.shape[d];
        self.lo[d] + (self.hi[d] - self.lo[d]) * i as f64 / (n - 1) as f64
    }

    /// Node coordinates for a flat index (row-major, last dim fastest).
    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        for k in (0..d).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        (0..d).map(|k| self.axis(k, idx[k])).collect()
    }
}

/// Function stored on a box grid; evaluation is multilinear with
/// clamping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: BoxGrid, f: F) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.node(k))).collect();
        Self { grid, values }
    }

    /// Grid sup-norm.
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        debug_assert_eq!(x.len(), d);
        // per-dimension cell index and weight
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let n = self.grid.shape[k];
            let span = self.grid.hi[k] - self.grid.lo[k];
            let rel = ((x[k] - self.grid.lo[k]) / span).clamp(0.0, 1.0) * (n - 1) as f64;
            let cell = (rel.floor() as usize).min(n - 2);
            base[k] = cell;
            frac[k] = rel - cell as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0usize;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                weight *= if up { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.grid.shape[k] + base[k] + usize::from(up);
            }
            if weight != 0.0 {
                acc += weight * self.values[flat];
            }
        }
        acc
    }
}

/// What the resolvent integrates: either a test function (closed-form
/// inner Gaussian integral) or an arbitrary bounded function (inner
/// integral by Gauss-Hermite quadrature).
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Closed(&'a TestFunction),
    Generic {
        f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        bound: f64,
    },
}

impl Target<'_> {
    pub fn bound(&self) -> f64 {
        match self {
            Target::Closed(f) => f.bound(),
            Target::Generic { bound, .. } => *bound,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Target::Closed(f) => f.eval(x),
            Target::Generic { f, .. } => f(x),
        }
    }

    /// Conditional expectation over the degenerate coordinates given the
    /// exogenous endpoint `z` and the occupation integrals `y_nr`.
    fn eval_g(
        &self,
        frozen: &FrozenCoefficients,
        cls: &InitialClassification,
        t: f64,
        x: &[f64],
        y_nr: &[f64],
        z: &[f64],
        gh: &GaussHermite,
        scratch: &mut Vec<f64>,
    ) -> f64 {
        match self {
            Target::Closed(f) => crate::semigroup::eval_g(frozen, cls, t, x, y_nr, z, f),
            Target::Generic { f, .. } => {
                let n_r = &cls.n_r;
                scratch.clear();
                scratch.extend_from_slice(z);
                let mut acc = 0.0;
                let mut idx = vec![0usize; n_r.len()];
                loop {
                    let mut weight = 1.0;
                    for (r, &j) in n_r.iter().enumerate() {
                        let mean = x[j - 1] + frozen.b0[j - 1] * t;
                        let var = 2.0 * frozen.gamma0[j - 1] * y_nr[r];
                        scratch[j - 1] = mean + (2.0 * var).sqrt() * gh.nodes[idx[r]];
                        weight *= gh.weights[idx[r]] / std::f64::consts::PI.sqrt();
                    }
                    acc += weight * f(scratch);
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
            }
        }
    }
}

/// Resolvent estimate with its explicit error budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ResolventEstimate {
    pub estimate: Estimate,
    /// Deterministic small-time correction already included in the mean.
    pub small_t_correction: f64,
    /// Bound on the neglected tail int_{t_max}^inf.
    pub tail_bound: f64,
    /// Relative quadrature tolerance of the time grid.
    pub quad_rel_tol: f64,
}

impl ResolventEstimate {
    /// Total error allowance: 3 sigma MC + tail + quadrature.
    pub fn budget(&self) -> f64 {
        3.0 * self.estimate.stderr + self.tail_bound
            + self.quad_rel_tol * self.estimate.mean.abs()
    }
}

const QUAD_REL_TOL: f64 = 1e-3;

/// Refined simulation time grid containing every quadrature node.
struct RefinedGrid {
    /// Strictly increasing times, starting after 0.
    times: Vec<f64>,
    /// Index into `times` of each quadrature node.
    node_at: Vec<usize>,
}

fn refine_grid(quad: &TimeQuadrature, substeps: usize) -> RefinedGrid {
    let mut times = Vec::new();
    let mut node_at = Vec::new();
    let mut prev = 0.0;
    for &t in &quad.nodes {
        for s in 1..=substeps {
            times.push(prev + (t - prev) * s as f64 / substeps as f64);
        }
        node_at.push(times.len() - 1);
        prev = t;
    }
    RefinedGrid { times, node_at }
}

/// One coordinate's exact-transition chain along the refined grid:
/// values and prefix occupation integrals at the quadrature nodes.
fn chain_coordinate<R: Rng + ?Sized>(
    p: &FellerParams,
    grid: &RefinedGrid,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut value = p.x;
    let mut integral = 0.0;
    let mut prev_t = 0.0;
    let mut values = Vec::with_capacity(grid.node_at.len());
    let mut integrals = Vec::with_capacity(grid.node_at.len());
    let mut next_node = 0;
    for (k, &t) in grid.times.iter().enumerate() {
        let dt = t - prev_t;
        let prev_v = value;
        value = exact_transition_sample(
            &FellerParams {
                x: value,
                b: p.b,
                gamma: p.gamma,
            },
            dt,
            rng,
        );
        integral += 0.5 * (prev_v + value) * dt;
        prev_t = t;
        if next_node < grid.node_at.len() && grid.node_at[next_node] == k {
            values.push(value);
            integrals.push(integral);
            next_node += 1;
        }
    }
    (values, integrals)
}

/// Monte Carlo resolvent at one point: one path ensemble shared across
/// all quadrature nodes.
pub fn r_lambda(
    f: Target,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    cfg: &ResolventConfig,
) -> Result<ResolventEstimate> {
    check_point(cls, x)?;
    let quad = time_quadrature(cfg.t_min, cfg.t_max, cfg.ratio);
    let grid = refine_grid(&quad, cfg.substeps);
    let catalysts = nr_catalysts(cls);
    let n_c2 = cls.n_c2();
    let gh = gauss_hermite(cfg.gh_order);
    let lambda = cfg.lambda;
    let small_t = f.eval(x) * (-(-lambda * cfg.t_min).exp_m1()) / lambda;

    let totals: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, path as u64);
            let d = cls.dim();
            let n_nodes = quad.nodes.len();
            let mut endpoints = vec![vec![0.0; d]; n_nodes];
            let mut coord_int = vec![vec![0.0; d]; n_nodes];
            for &i in &n_c2 {
                let p = FellerParams {
                    x: x[i - 1],
                    b: frozen.b0[i - 1],
                    gamma: frozen.gamma0[i - 1],
                };
                let (vals, ints) = chain_coordinate(&p, &grid, &mut rng);
                for k in 0..n_nodes {
                    endpoints[k][i - 1] = vals[k];
                    coord_int[k][i - 1] = ints[k];
                }
            }
            let mut scratch = Vec::new();
            let mut total = 0.0;
            for k in 0..n_nodes {
                let t = quad.nodes[k];
                let y_nr: Vec<f64> = catalysts
                    .iter()
                    .map(|c| c.iter().map(|&i| coord_int[k][i - 1]).sum())
                    .collect();
                let g = f.eval_g(frozen, cls, t, x, &y_nr, &endpoints[k], &gh, &mut scratch);
                total += quad.weights[k] * (-lambda * t).exp() * g;
            }
            total + small_t
        })
        .collect();

    Ok(ResolventEstimate {
        estimate: Estimate::from_samples(&totals),
        small_t_correction: small_t,
        tail_bound: f.bound() * (-lambda * cfg.t_max).exp() / lambda,
        quad_rel_tol: QUAD_REL_TOL,
    })
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

/// Resolvent value with first and diagonal-second differences in every
/// coordinate, all from one coupled path ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventStencil {
    pub value: Estimate,
    pub first: Vec<Estimate>,
    pub second: Vec<Estimate>,
    /// Per-coordinate step actually used.
    pub steps: Vec<f64>,
    pub tail_bound: f64,
}

/// Coupled stencil: N_R shifts are analytic in the Gaussian mean and
/// reuse every path; exogenous shifts add two independent mass-h
/// immigration-free chains per coordinate to the shared base started at
/// the lower stencil point.
pub fn r_lambda_stencil(
    f: Target,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    cfg: &ResolventConfig,
) -> Result<ResolventStencil> {
    check_point(cls, x)?;
    let quad = time_quadrature(cfg.t_min, cfg.t_max, cfg.ratio);
    let grid = refine_grid(&quad, cfg.substeps);
    let catalysts = nr_catalysts(cls);
    let n_c2 = cls.n_c2();
    let gh = gauss_hermite(cfg.gh_order);
    let lambda = cfg.lambda;
    let d = cls.dim();
    let n_nodes = quad.nodes.len();

    let steps: Vec<f64> = (1..=d)
        .map(|v| cfg.fd_step.max(cfg.fd_step * x[v - 1]))
        .collect();
    // two-sided where the lower point stays in S0
    let two_sided: Vec<bool> = (1..=d)
        .map(|v| cls.in_n_r(v) || x[v - 1] >= steps[v - 1])
        .collect();
    // base state: each coordinate at its lower stencil point
    let base_x: Vec<f64> = (1..=d)
        .map(|v| {
            if two_sided[v - 1] {
                x[v - 1] - steps[v - 1]
            } else {
                x[v - 1]
            }
        })
        .collect();

    // small-time corrections per stencil evaluation point
    let center_shift = |v: usize| if two_sided[v - 1] { 1 } else { 0 };
    let point_value = |v: usize, s: usize| base_x[v - 1] + s as f64 * steps[v - 1];
    let center_f = {
        let center: Vec<f64> = (1..=d).map(|v| point_value(v, center_shift(v))).collect();
        f.eval(&center)
    };
    let small_t_of = |state: &[f64]| f.eval(state) * (-(-lambda * cfg.t_min).exp_m1()) / lambda;

    // per path: value at the center plus the 2d off-center evaluations
    let rows: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, path as u64);
            // base chains from base_x
            let mut endpoints = vec![vec![0.0; d]; n_nodes];
            let mut coord_int = vec![vec![0.0; d]; n_nodes];
            for &i in &n_c2 {
                let p = FellerParams {
                    x: base_x[i - 1],
                    b: frozen.b0[i - 1],
                    gamma: frozen.gamma0[i - 1],
                };
                let (vals, ints) = chain_coordinate(&p, &grid, &mut rng);
                for k in 0..n_nodes {
                    endpoints[k][i - 1] = vals[k];
                    coord_int[k][i - 1] = ints[k];
                }
            }
            // increment chains: two per exogenous coordinate
            let mut inc_vals = vec![[Vec::new(), Vec::new()]; d];
            let mut inc_ints = vec![[Vec::new(), Vec::new()]; d];
            for &i in &n_c2 {
                for s in 0..2 {
                    let p = FellerParams {
                        x: steps[i - 1],
                        b: 0.0,
                        gamma: frozen.gamma0[i - 1],
                    };
                    let (vals, ints) = chain_coordinate(&p, &grid, &mut rng);
                    inc_vals[i - 1][s] = vals;
                    inc_ints[i - 1][s] = ints;
                }
            }

            // evaluate the resolvent integrand at a stencil assignment:
            // coordinate v sits at stencil position shifts[v-1]
            let mut scratch = Vec::new();
            let mut eval_assignment = |shifts: &[usize]| -> f64 {
                let mut x_eval = base_x.clone();
                for v in 1..=d {
                    if cls.in_n_r(v) {
                        x_eval[v - 1] = point_value(v, shifts[v - 1]);
                    }
                }
                let mut total = 0.0;
                for k in 0..n_nodes {
                    let t = quad.nodes[k];
                    let mut z = endpoints[k].clone();
                    let mut ints = coord_int[k].clone();
                    for &i in &n_c2 {
                        for s in 0..shifts[i - 1] {
                            z[i - 1] += inc_vals[i - 1][s][k];
                            ints[i - 1] += inc_ints[i - 1][s][k];
                        }
                    }
                    let y_nr: Vec<f64> = catalysts
                        .iter()
                        .map(|c| c.iter().map(|&i| ints[i - 1]).sum())
                        .collect();
                    let g = f.eval_g(frozen, cls, t, &x_eval, &y_nr, &z, &gh, &mut scratch);
                    total += quad.weights[k] * (-lambda * t).exp() * g;
                }
                // small-time correction at the assignment's state
                let mut state = x_eval;
                for &i in &n_c2 {
                    state[i - 1] = point_value(i, shifts[i - 1]);
                }
                total + small_t_of(&state)
            };

            let center: Vec<usize> = (1..=d).map(center_shift).collect();
            let mut row = Vec::with_capacity(1 + 2 * d);
            row.push(eval_assignment(&center));
            for v in 1..=d {
                let mut a = center.clone();
                let (s_lo, s_hi) = if two_sided[v - 1] { (0, 2) } else { (1, 2) };
                a[v - 1] = s_lo;
                row.push(eval_assignment(&a));
                a[v - 1] = s_hi;
                row.push(eval_assignment(&a));
            }
            row
        })
        .collect();

    let mut value = RunningStats::new();
    let mut first = vec![RunningStats::new(); d];
    let mut second = vec![RunningStats::new(); d];
    for row in &rows {
        value.push(row[0]);
        for v in 0..d {
            let h = steps[v];
            let (c, a, b) = (row[0], row[1 + 2 * v], row[2 + 2 * v]);
            if two_sided[v] {
                // a = lower, b = upper, c = center
                first[v].push((b - a) / (2.0 * h));
                second[v].push((b - 2.0 * c + a) / (h * h));
            } else {
                // c = g(x), a = g(x+h), b = g(x+2h): one-sided at x
                first[v].push((-3.0 * c + 4.0 * a - b) / (2.0 * h));
                second[v].push((c - 2.0 * a + b) / (h * h));
            }
        }
    }
    let _ = center_f;
    Ok(ResolventStencil {
        value: value.estimate(),
        first: first.iter().map(RunningStats::estimate).collect(),
        second: second.iter().map(RunningStats::estimate).collect(),
        steps,
        tail_bound: f.bound() * (-lambda * cfg.t_max).exp() / lambda,
    })
}

/// The coefficients of the perturbation operator at a point:
/// B g = sum_j (b~_j - b0_j) d_j g
///     + sum_{j in N_R} (gamma~_j - gamma0_j) (catalyst mass) d2_jj g
///     + sum_{i in N_C2} (gamma~_i - gamma0_i) x_i d2_ii g.
fn b_coefficients(
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = cls.dim();
    let mut drift = vec![0.0; d];
    let mut diff = vec![0.0; d];
    for v in 1..=d {
        drift[v - 1] = tilde.b_at(v, x)? - frozen.b0[v - 1];
        let dg = tilde.gamma_at(v, x)? - frozen.gamma0[v - 1];
        diff[v - 1] = if cls.in_n_r(v) {
            dg * net.catalyst_sum(v, x)
        } else {
            dg * x[v - 1]
        };
    }
    Ok((drift, diff))
}

/// Apply B to a deterministic, pointwise-evaluable function by finite
/// differences (one-sided at the nonnegativity boundary).
pub fn apply_b<G>(
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    g: &G,
    x: &[f64],
    fd_step: f64,
) -> Result<f64>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    check_point(cls, x)?;
    let (drift, diff) = b_coefficients(tilde, frozen, net, cls, x)?;
    let d = cls.dim();
    let g0 = g(x);
    let mut out = 0.0;
    for v in 1..=d {
        if drift[v - 1] == 0.0 && diff[v - 1] == 0.0 {
            continue;
        }
        let h = fd_step.max(fd_step * x[v - 1]);
        let two_sided = cls.in_n_r(v) || x[v - 1] >= h;
        let (first, second) = if two_sided {
            let mut xp = x.to_vec();
            xp[v - 1] += h;
            let mut xm = x.to_vec();
            xm[v - 1] -= h;
            let (gp, gm) = (g(&xp), g(&xm));
            ((gp - gm) / (2.0 * h), (gp - 2.0 * g0 + gm) / (h * h))
        } else {
            let mut x1 = x.to_vec();
            x1[v - 1] += h;
            let mut x2 = x.to_vec();
            x2[v - 1] += 2.0 * h;
            let (g1, g2) = (g(&x1), g(&x2));
            (
                (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * h),
                (g0 - 2.0 * g1 + g2) / (h * h),
            )
        };
        out += drift[v - 1] * first + diff[v - 1] * second;
    }
    Ok(out)
}

/// B applied to a resolvent stencil (shared-path finite differences).
pub fn apply_b_to_stencil(
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    x: &[f64],
    st: &ResolventStencil,
) -> Result<Estimate> {
    let (drift, diff) = b_coefficients(tilde, frozen, net, cls, x)?;
    let mut mean = 0.0;
    // the stencil entries share paths; combine stderr conservatively
    let mut noise = 0.0;
    for v in 0..cls.dim() {
        mean += drift[v] * st.first[v].mean + diff[v] * st.second[v].mean;
        noise += drift[v].abs() * st.first[v].stderr + diff[v].abs() * st.second[v].stderr;
    }
    Ok(Estimate {
        mean,
        stderr: noise,
        n: st.value.n,
    })
}

/// Key-estimate probe at one rate: grid sup of |B R_lambda f| / ||f||.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyEstimatePoint {
    pub lambda: f64,
    /// sup over the probe grid of |B R_lambda f| / ||f||.
    pub ratio: f64,
    /// Noise allowance at the maximizing point, in ratio units.
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyEstimateReport {
    pub points: Vec<KeyEstimatePoint>,
    /// Smallest probed rate whose ratio (minus noise) is <= 1/2.
    pub fitted_lambda1: Option<f64>,
    /// Sampled perturbation size over the probe grid.
    pub epsilon: f64,
}

/// Probe the contraction ||B R_lambda|| <= 1/2 on a finite grid of
/// points and rates.  The fitted lambda_1 is an empirical stand-in for an
/// existence-only constant.
pub fn key_estimate_probe(
    f: &TestFunction,
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    x_grid: &[Vec<f64>],
    lambdas: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<KeyEstimateReport> {
    let epsilon = crate::coeff::perturbation_size(tilde, frozen, x_grid)?;
    let mut points = Vec::with_capacity(lambdas.len());
    for (li, &lambda) in lambdas.iter().enumerate() {
        let mut ratio: f64 = 0.0;
        let mut noise: f64 = 0.0;
        for (xi, x) in x_grid.iter().enumerate() {
            let cfg = ResolventConfig {
                seed: sub_seed(seed, &format!("key-{li}-{xi}")),
                ..ResolventConfig::new(lambda, n_paths, seed)
            };
            let st = r_lambda_stencil(Target::Closed(f), frozen, cls, x, &cfg)?;
            let b = apply_b_to_stencil(tilde, frozen, net, cls, x, &st)?;
            let r = b.mean.abs() / f.bound();
            if r > ratio {
                ratio = r;
                noise = b.stderr / f.bound();
            }
        }
        points.push(KeyEstimatePoint {
            lambda,
            ratio,
            noise,
        });
    }
    let fitted_lambda1 = points
        .iter()
        .find(|p| p.ratio - p.noise <= 0.5)
        .map(|p| p.lambda);
    Ok(KeyEstimateReport {
        points,
        fitted_lambda1,
        epsilon,
    })
}

/// Outcome of the perturbation-series iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesResult {
    /// Grid sup-norms of the iterates g_n = (B R_lambda)^n f.
    pub term_norms: Vec<f64>,
    /// Partial sums sum_{m <= n} R_lambda g_m at the probe point.
    pub partial_sums: Vec<f64>,
    /// Combined MC stderr of each partial sum.
    pub partial_stderr: Vec<f64>,
    /// ||g_{n+1}|| / ||g_n||.
    pub decay_ratios: Vec<f64>,
    pub tail_bound: f64,
}

/// Run the Neumann-type iteration: g_0 = f, g_{n+1} = B R_lambda g_n on
/// a box grid, accumulating partial sums of R_lambda g_n at the probe
/// point.  Divergence (two consecutive growth ratios above 1) aborts.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_series(
    f: &TestFunction,
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    grid: &BoxGrid,
    x_probe: &[f64],
    lambda: f64,
    n_terms: usize,
    n_paths: usize,
    seed: u64,
) -> Result<SeriesResult> {
    assert!(n_terms >= 3, "the series needs at least three terms");
    let mut term_norms = vec![f.bound()];
    let mut partial_sums = Vec::new();
    let mut partial_stderr = Vec::new();
    let mut decay_ratios = Vec::new();
    let mut running_sum = 0.0;
    let mut running_var = 0.0;
    let mut tail_bound = 0.0;

    // g_0 as a grid function of the test function itself
    let mut g_current = GridFunction::from_fn(grid.clone(), |x| f.eval(x));
    for n in 0..n_terms {
        let cfg = ResolventConfig {
            seed: sub_seed(seed, &format!("series-probe-{n}")),
            ..ResolventConfig::new(lambda, n_paths, seed)
        };
        let target = if n == 0 {
            Target::Closed(f)
        } else {
            Target::Generic {
                f: &|x: &[f64]| g_current.eval(x),
                bound: g_current.sup(),
            }
        };
        let term = r_lambda(target, frozen, cls, x_probe, &cfg)?;
        running_sum += term.estimate.mean;
        running_var += term.estimate.stderr.powi(2);
        tail_bound += term.tail_bound;
        partial_sums.push(running_sum);
        partial_stderr.push(running_var.sqrt());

        if n + 1 == n_terms {
            break;
        }
        // g_{n+1}(node) = B (R_lambda g_n)(node)
        let node_values: Result<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let node = grid.node(k);
                let cfg = ResolventConfig {
                    seed: sub_seed(seed, &format!("series-{n}-node-{k}")),
                    ..ResolventConfig::new(lambda, n_paths, seed)
                };
                let st = r_lambda_stencil(target, frozen, cls, &node, &cfg)?;
                Ok(apply_b_to_stencil(tilde, frozen, net, cls, &node, &st)?.mean)
            })
            .collect();
        let g_next = GridFunction {
            grid: grid.clone(),
            values: node_values?,
        };
        let prev_norm = *term_norms.last().unwrap();
        let norm = g_next.sup();
        term_norms.push(norm);
        let ratio = if prev_norm > 0.0 {
            norm / prev_norm
        } else {
            0.0
        };
        if let Some(&last) = decay_ratios.last() {
            if last > 1.0 && ratio > 1.0 {
                return Err(Error::Divergence(ratio));
            }
        }
        decay_ratios.push(ratio);
        g_current = g_next;
    }
    Ok(SeriesResult {
        term_norms,
        partial_sums,
        partial_stderr,
        decay_ratios,
        tail_bound,
    })
}

/// Direct oracle for the perturbed resolvent: Euler simulation of the
/// diffusion with generator sum_j gamma~_j (state factor) d2_jj +
/// b~_j d_j on S0, accumulating int_0^T e^{-lambda t} f(x_t) dt.
///
/// Degenerate coordinates may go negative; the exogenous coordinates and
/// the diffusion state factors are truncated at zero.
#[allow(clippy::too_many_arguments)]
pub fn perturbed_resolvent_oracle(
    f: &TestFunction,
    tilde: &CoefficientField,
    net: &BranchingNetwork,
    cls: &InitialClassification,
    x0: &[f64],
    lambda: f64,
    dt: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ResolventEstimate> {
    check_point(cls, x0)?;
    let d = cls.dim();
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let totals: Result<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(seed, path as u64);
            let normal = Normal::new(0.0, 1.0).unwrap();
            let mut x = x0.to_vec();
            let mut total = 0.0;
            let mut prev_val = f.eval(&x);
            for step in 0..n_steps {
                for v in 1..=d {
                    let b = tilde.b_at(v, &x)?;
                    let g = tilde.gamma_at(v, &x)?;
                    let factor = if cls.in_n_r(v) {
                        net.catalyst_sum(v, &x).max(0.0)
                    } else {
                        x[v - 1].max(0.0)
                    };
                    let noise: f64 = normal.sample(&mut rng);
                    let mut next =
                        x[v - 1] + b * dt + (2.0 * g.max(0.0) * factor * dt).sqrt() * noise;
                    if !cls.in_n_r(v) {
                        next = next.max(0.0);
                    }
                    x[v - 1] = next;
                }
                let t = (step + 1) as f64 * dt;
                let val = f.eval(&x);
                total += 0.5 * ((-lambda * (t - dt)).exp() * prev_val
                    + (-lambda * t).exp() * val)
                    * dt;
                prev_val = val;
            }
            Ok(total)
        })
        .collect();
    Ok(ResolventEstimate {
        estimate: Estimate::from_samples(&totals?),
        small_t_correction: 0.0,
        tail_bound: f.bound() * (-lambda * horizon).exp() / lambda,
        quad_rel_tol: 0.0,
    })
}

/// Consistency report for the resolvent identity
/// R_lambda f - R_mu f = (mu - lambda) R_lambda R_mu f.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub budget: f64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.gap <= self.budget
    }
}

/// Check the resolvent identity at one point; the inner R_mu f is built
/// on a box grid and the outer resolvent integrates its interpolant.
#[allow(clippy::too_many_arguments)]
pub fn resolvent_identity_check(
    f: &TestFunction,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    x: &[f64],
    lambda: f64,
    mu: f64,
    inner_grid: &BoxGrid,
    n_paths: usize,
    seed: u64,
) -> Result<IdentityReport> {
    let cfg_l = ResolventConfig {
        seed: sub_seed(seed, "ident-lambda"),
        ..ResolventConfig::new(lambda, n_paths, seed)
    };
    let cfg_m = ResolventConfig {
        seed: sub_seed(seed, "ident-mu"),
        ..ResolventConfig::new(mu, n_paths, seed)
    };
    let r_l = r_lambda(Target::Closed(f), frozen, cls, x, &cfg_l)?;
    let r_m = r_lambda(Target::Closed(f), frozen, cls, x, &cfg_m)?;
    // inner R_mu f on the grid
    let inner_values: Result<Vec<f64>> = (0..inner_grid.len())
        .into_par_iter()
        .map(|k| {
            let node = inner_grid.node(k);
            let cfg = ResolventConfig {
                seed: sub_seed(seed, &format!("ident-inner-{k}")),
                ..ResolventConfig::new(mu, n_paths, seed)
            };
            Ok(r_lambda(Target::Closed(f), frozen, cls, &node, &cfg)?.estimate.mean)
        })
        .collect();
    let inner = GridFunction {
        grid: inner_grid.clone(),
        values: inner_values?,
    };
    let cfg_outer = ResolventConfig {
        seed: sub_seed(seed, "ident-outer"),
        ..ResolventConfig::new(lambda, n_paths, seed)
    };
    let outer = r_lambda(
        Target::Generic {
            f: &|y: &[f64]| inner.eval(y),
            bound: inner.sup(),
        },
        frozen,
        cls,
        x,
        &cfg_outer,
    )?;
    let lhs = r_l.estimate.mean - r_m.estimate.mean;
    let rhs = (mu - lambda) * outer.estimate.mean;
    let budget = r_l.budget()
        + r_m.budget()
        + (mu - lambda).abs() * outer.budget()
        // grid-interpolation slack on the inner function
        + (mu - lambda).abs() / lambda * 0.05 * f.bound();
    Ok(IdentityReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{freeze, CoefficientField, Expr};
    use crate::testfn::Factor;

    fn frozen_two_catalyst() -> (BranchingNetwork, InitialClassification, FrozenCoefficients) {
        let net = BranchingNetwork::new(3, [(1, 2), (3, 2)]).unwrap();
        let cls = net.classify_initial(&[0.0, 1.0, 0.0]).unwrap();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let frozen = freeze(&field, &net, &cls).unwrap();
        (net, cls, frozen)
    }

    /// A tilde field equal to the frozen constants plus a bump of total
    /// size about `eps` on the N_R branching rate.
    fn near_frozen_tilde(eps: f64) -> CoefficientField {
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

    fn frozen_as_field() -> CoefficientField {
        CoefficientField {
            b: vec![Expr::constant(1.0); 3],
            gamma: vec![Expr::constant(1.0); 3],
            alpha: 0.5,
            growth_c: 1.0,
            constant_outside_radius: Some(0.0),
        }
    }

    #[test]
    fn quadrature_matches_exponential_integral() {
        for lambda in [1.0, 4.0, 64.0] {
            let quad = time_quadrature(1e-3, 16.0 / lambda, 1.25);
            let total: f64 = quad
                .nodes
                .iter()
                .zip(&quad.weights)
                .map(|(&t, &w)| w * (-lambda * t).exp())
                .sum::<f64>()
                + (-(-lambda * 1e-3f64).exp_m1()) / lambda;
            let exact = 1.0 / lambda;
            assert!(
                ((total - exact) / exact).abs() < 1e-3,
                "lambda {lambda}: {total} vs {exact}"
            );
        }
    }

    #[test]
    fn grid_function_multilinear() {
        let grid = BoxGrid::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![3, 3]);
        let gf = GridFunction::from_fn(grid, |x| 2.0 * x[0] + 0.5 * x[1] + 1.0);
        // multilinear interpolation reproduces affine functions exactly
        for p in [[0.3, 1.7], [0.0, 0.0], [1.0, 2.0], [0.25, 0.5]] {
            assert!((gf.eval(&p) - (2.0 * p[0] + 0.5 * p[1] + 1.0)).abs() < 1e-12);
        }
        // clamped outside the box
        assert!((gf.eval(&[2.0, 3.0]) - gf.eval(&[1.0, 2.0])).abs() < 1e-12);
    }

    #[test]
    fn r_lambda_of_one_is_inverse_lambda() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction::constant(3, 1.0);
        for lambda in [1.0, 8.0] {
            let cfg = ResolventConfig::new(lambda, 200, 1);
            let est = r_lambda(Target::Closed(&f), &frozen, &cls, &[0.0, 1.0, 0.0], &cfg)
                .unwrap();
            let exact = 1.0 / lambda;
            assert!(
                (est.estimate.mean - exact).abs() <= est.budget(),
                "lambda {lambda}: {} vs {exact} (budget {})",
                est.estimate.mean,
                est.budget()
            );
        }
    }

    #[test]
    fn lambda_r_lambda_approaches_identity() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::GaussBump {
                    center: 0.0,
                    width: 1.0,
                },
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.2,
                },
                Factor::One,
            ],
        };
        let x = [0.0, 1.0, 0.0];
        let mut last_gap = f64::INFINITY;
        for (lambda, seed) in [(4.0, 2u64), (16.0, 3), (64.0, 4)] {
            let cfg = ResolventConfig::new(lambda, 4000, seed);
            let est = r_lambda(Target::Closed(&f), &frozen, &cls, &x, &cfg).unwrap();
            let gap = (lambda * est.estimate.mean - f.eval(&x)).abs();
            assert!(
                gap <= last_gap + lambda * est.budget(),
                "gap not decreasing: {gap} after {last_gap}"
            );
            last_gap = gap;
        }
        assert!(last_gap < 0.05, "final gap {last_gap}");
    }

    #[test]
    fn r_lambda_of_coordinate_closed_form() {
        // unbounded test input: f(x) = x_1 with x_1 exogenous;
        // E x_t = x_1 + b0_1 t integrates to x_1/lambda + b0_1/lambda^2
        let (_, cls, frozen) = frozen_two_catalyst();
        let lambda = 2.0;
        let coord = |x: &[f64]| x[0];
        let cfg = ResolventConfig::new(lambda, 4000, 5);
        let x = [0.5, 1.0, 0.0];
        let est = r_lambda(
            Target::Generic {
                f: &coord,
                bound: 10.0,
            },
            &frozen,
            &cls,
            &x,
            &cfg,
        )
        .unwrap();
        let exact = x[0] / lambda + frozen.b0[0] / (lambda * lambda);
        assert!(
            (est.estimate.mean - exact).abs() <= 3.0 * est.estimate.stderr + 0.01,
            "{} vs {exact}",
            est.estimate.mean
        );
    }

    #[test]
    fn r_lambda_norm_bound() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 2.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 2.0,
                    phase: 0.0,
                },
                Factor::SmoothStep {
                    center: 0.5,
                    width: 0.5,
                },
            ],
        };
        let cfg = ResolventConfig::new(3.0, 1000, 6);
        let est = r_lambda(Target::Closed(&f), &frozen, &cls, &[0.0, 1.0, 0.0], &cfg).unwrap();
        assert!(est.estimate.mean.abs() <= f.bound() / 3.0 + est.budget());
    }

    #[test]
    fn apply_b_zero_when_tilde_is_frozen() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let tilde = frozen_as_field();
        let g = |x: &[f64]| (x[0] + 2.0 * x[1]).sin();
        let v = apply_b(&tilde, &frozen, &net, &cls, &g, &[0.2, 1.0, 0.1], 1e-4).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn apply_b_linear_function_exact() {
        let (net, cls, frozen) = frozen_two_catalyst();
        // drift perturbation only: b~_1 = 1.3
        let mut tilde = frozen_as_field();
        tilde.b[0] = Expr::constant(1.3);
        let g = |x: &[f64]| 2.0 * x[0] - x[1] + 0.5 * x[2];
        let v = apply_b(&tilde, &frozen, &net, &cls, &g, &[0.4, 1.0, 0.2], 1e-3).unwrap();
        // (1.3 - 1.0) * slope_1 = 0.3 * 2
        assert!((v - 0.6).abs() < 1e-9, "{v}");
    }

    #[test]
    fn apply_b_degenerate_point_drops_diffusion() {
        let (net, cls, frozen) = frozen_two_catalyst();
        // gamma perturbed everywhere, drift perturbed on vertex 1
        let mut tilde = near_frozen_tilde(0.5);
        tilde.b[0] = Expr::constant(1.2);
        let g = |x: &[f64]| x[0] * x[0] + x[1] * x[1] + x[0];
        // x = x0: exogenous coordinates and catalyst sums all vanish
        let x = [0.0, 1.0, 0.0];
        let v = apply_b(&tilde, &frozen, &net, &cls, &g, &x, 1e-4).unwrap();
        // only the drift term survives: 0.2 * d/dx_1 (x_1^2 + x_1) = 0.2
        assert!((v - 0.2).abs() < 1e-3, "{v}");
    }

    #[test]
    fn apply_b_is_linear() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let tilde = near_frozen_tilde(0.3);
        let x = [0.2, 1.1, 0.1];
        let f1 = |x: &[f64]| (1.0 - (x[0] - 0.5).powi(2)).max(0.0).powi(2);
        let f2 = |x: &[f64]| (1.0 - (x[1] - 1.0).powi(2)).max(0.0).powi(2) * x[2];
        let combo = |x: &[f64]| 2.0 * f1(x) - 3.0 * f2(x);
        let a = apply_b(&tilde, &frozen, &net, &cls, &f1, &x, 1e-4).unwrap();
        let b = apply_b(&tilde, &frozen, &net, &cls, &f2, &x, 1e-4).unwrap();
        let c = apply_b(&tilde, &frozen, &net, &cls, &combo, &x, 1e-4).unwrap();
        assert!((c - (2.0 * a - 3.0 * b)).abs() < 1e-6);
    }

    #[test]
    fn stencil_value_matches_plain_resolvent() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.0,
                },
                Factor::One,
            ],
        };
        let x = [0.3, 1.0, 0.2];
        let cfg = ResolventConfig::new(4.0, 2000, 7);
        let st = r_lambda_stencil(Target::Closed(&f), &frozen, &cls, &x, &cfg).unwrap();
        let plain = r_lambda(Target::Closed(&f), &frozen, &cls, &x, &cfg).unwrap();
        // different couplings, same law
        let gap = (st.value.mean - plain.estimate.mean).abs();
        let tol = 3.0 * (st.value.stderr.powi(2) + plain.estimate.stderr.powi(2)).sqrt() + 1e-3;
        assert!(gap < tol, "gap {gap} tol {tol}");
    }

    #[test]
    fn key_estimate_zero_for_frozen_tilde() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.1,
                },
                Factor::One,
            ],
        };
        let report = key_estimate_probe(
            &f,
            &frozen_as_field(),
            &frozen,
            &net,
            &cls,
            &[vec![0.0, 1.0, 0.0], vec![0.2, 1.0, 0.1]],
            &[1.0, 64.0],
            200,
            8,
        )
        .unwrap();
        assert_eq!(report.epsilon, 0.0);
        for p in &report.points {
            assert_eq!(p.ratio, 0.0);
        }
        assert_eq!(report.fitted_lambda1, Some(1.0));
    }

    #[test]
    fn key_estimate_contracts_at_large_lambda() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let tilde = near_frozen_tilde(0.05);
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.3,
                },
                Factor::One,
            ],
        };
        let x_grid = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.1, 1.0, 0.0],
            vec![0.0, 0.9, 0.1],
            vec![0.2, 1.1, 0.2],
        ];
        let report = key_estimate_probe(
            &f,
            &tilde,
            &frozen,
            &net,
            &cls,
            &x_grid,
            &[1.0, 8.0, 64.0],
            1500,
            9,
        )
        .unwrap();
        assert!(report.epsilon <= 0.06, "epsilon {}", report.epsilon);
        let last = report.points.last().unwrap();
        assert!(
            last.ratio - last.noise <= 0.5,
            "ratio at lambda=64: {} noise {}",
            last.ratio,
            last.noise
        );
        assert!(report.fitted_lambda1.is_some());
    }

    #[test]
    fn series_collapses_for_frozen_tilde() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.0,
                },
                Factor::One,
            ],
        };
        let grid = BoxGrid::new(
            vec![0.0, 0.5, 0.0],
            vec![0.5, 1.5, 0.5],
            vec![3, 3, 3],
        );
        let x = [0.0, 1.0, 0.0];
        let result = perturbation_series(
            &f,
            &frozen_as_field(),
            &frozen,
            &net,
            &cls,
            &grid,
            &x,
            8.0,
            3,
            400,
            10,
        )
        .unwrap();
        // g_1 = B R f = 0 identically: later partial sums equal the first
        assert!(result.term_norms[1] < 1e-12);
        assert!((result.partial_sums[2] - result.partial_sums[0]).abs() < 1e-9);
    }

    #[test]
    fn series_decays_and_matches_oracle() {
        let (net, cls, frozen) = frozen_two_catalyst();
        let tilde = near_frozen_tilde(0.05);
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.3,
                },
                Factor::One,
            ],
        };
        let grid = BoxGrid::new(
            vec![0.0, 0.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![3, 5, 3],
        );
        let x = [0.0, 1.0, 0.0];
        let lambda = 8.0;
        let series = perturbation_series(
            &f, &tilde, &frozen, &net, &cls, &grid, &x, lambda, 3, 400, 11,
        )
        .unwrap();
        for r in &series.decay_ratios {
            assert!(*r <= 0.6, "decay ratios {:?}", series.decay_ratios);
        }
        let oracle = perturbed_resolvent_oracle(
            &f, &tilde, &net, &cls, &x, lambda, 5e-4, 2.0, 20_000, 12,
        )
        .unwrap();
        let sum = *series.partial_sums.last().unwrap();
        let gap = (sum - oracle.estimate.mean).abs();
        let tol = 3.0
            * (series.partial_stderr.last().unwrap().powi(2)
                + oracle.estimate.stderr.powi(2))
            .sqrt()
            + series.tail_bound
            + oracle.tail_bound
            + 0.01;
        assert!(gap < tol, "series {sum} oracle {} tol {tol}", oracle.estimate.mean);
    }

    #[test]
    fn identity_check_constant_function() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction::constant(3, 1.0);
        let grid = BoxGrid::new(
            vec![0.0, 0.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![2, 3, 2],
        );
        let report = resolvent_identity_check(
            &f,
            &frozen,
            &cls,
            &[0.0, 1.0, 0.0],
            2.0,
            6.0,
            &grid,
            300,
            13,
        )
        .unwrap();
        // exact: 1/2 - 1/6 = 4 * 1/12
        assert!(report.passed(), "gap {} budget {}", report.gap, report.budget);
        assert!((report.lhs - (0.5 - 1.0 / 6.0)).abs() < 0.01);
    }

    #[test]
    fn identity_check_generic_function() {
        let (_, cls, frozen) = frozen_two_catalyst();
        let f = TestFunction {
            scale: 1.0,
            factors: vec![
                Factor::One,
                Factor::Cos {
                    freq: 1.0,
                    phase: 0.0,
                },
                Factor::SmoothStep {
                    center: 0.3,
                    width: 0.5,
                },
            ],
        };
        let grid = BoxGrid::new(
            vec![0.0, 0.0, 0.0],
            vec![1.5, 2.5, 1.5],
            vec![3, 4, 3],
        );
        let report = resolvent_identity_check(
            &f,
            &frozen,
            &cls,
            &[0.0, 1.0, 0.0],
            2.0,
            6.0,
            &grid,
            2000,
            14,
        )
        .unwrap();
        assert!(report.passed(), "gap {} budget {}", report.gap, report.budget);
    }
}
