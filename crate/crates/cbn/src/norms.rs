//! Weighted Hoelder seminorms on finite grids, the semigroup norm, their
//! equivalence check, and the product rule.
//!
//! Both norms are sups; on a machine they are estimated as maxima over
//! finite grids, so every computed value is a lower bound that is monotone
//! under grid refinement.  All comparisons are therefore fitted-constant
//! stability checks rather than absolute assertions.

use serde::{Deserialize, Serialize};

use crate::coeff::FrozenCoefficients;
use crate::error::{Error, Result};
use crate::network::InitialClassification;
use crate::rng::sub_seed;
use crate::semigroup::{pt_f, pt_generic, McConfig};
use crate::stats::Estimate;
use crate::testfn::TestFunction;

/// Finite evaluation grid for the weighted seminorms: base points plus
/// per-coordinate displacement directions.
///
/// A displacement attached to coordinate i may only move i itself and the
/// degenerate coordinates it feeds, with the nonnegativity of the state
/// space respected; attached to a coordinate with neither role it must be
/// a single positive step in that coordinate.  Violations are rejected at
/// construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub base_points: Vec<Vec<f64>>,
    /// (coordinate i, displacement h) pairs; h is full-dimension.
    pub displacements: Vec<(usize, Vec<f64>)>,
    pub alpha: f64,
}

impl GridSpec {
    pub fn new(
        cls: &InitialClassification,
        base_points: Vec<Vec<f64>>,
        displacements: Vec<(usize, Vec<f64>)>,
        alpha: f64,
    ) -> Result<Self> {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        if base_points.is_empty() || displacements.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let d = cls.dim();
        for x in &base_points {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            if !cls.in_s0(x)? {
                return Err(Error::BadDisplacement(x.clone(), 0));
            }
        }
        for (i, h) in &displacements {
            validate_displacement(cls, *i, h)?;
        }
        Ok(Self {
            base_points,
            displacements,
            alpha,
        })
    }

    /// A refinement: same grid plus extra points/displacements.
    pub fn refined(
        &self,
        cls: &InitialClassification,
        extra_points: Vec<Vec<f64>>,
        extra_displacements: Vec<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        let mut base = self.base_points.clone();
        base.extend(extra_points);
        let mut disp = self.displacements.clone();
        disp.extend(extra_displacements);
        GridSpec::new(cls, base, disp, self.alpha)
    }
}

fn validate_displacement(cls: &InitialClassification, i: usize, h: &[f64]) -> Result<()> {
    let d = cls.dim();
    if h.len() != d || i == 0 || i > d {
        return Err(Error::BadDisplacement(h.to_vec(), i));
    }
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::BadDisplacement(h.to_vec(), i));
    }
    let bad = |v: &[f64]| Error::BadDisplacement(v.to_vec(), i);
    if cls.in_n_r(i) {
        // the seminorm is indexed by the nondegenerate coordinates only
        return Err(bad(h));
    }
    let support_nr = cls.rbar_of(i);
    if cls.n_2.contains(&i) && support_nr.is_empty() {
        // pure N_2 coordinate: a single positive step in i
        for k in 1..=d {
            let v = h[k - 1];
            if k == i {
                if v <= 0.0 {
                    return Err(bad(h));
                }
            } else if v != 0.0 {
                return Err(bad(h));
            }
        }
    } else {
        // catalyst coordinate: support in {i} plus the fed N_R vertices,
        // nonnegative step in i itself
        for k in 1..=d {
            let v = h[k - 1];
            if k == i {
                if v < 0.0 {
                    return Err(bad(h));
                }
            } else if !support_nr.contains(&k) && v != 0.0 {
                return Err(bad(h));
            }
        }
    }
    Ok(())
}

/// Per-coordinate weighted seminorm values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormValues {
    /// (coordinate, seminorm) for each nondegenerate coordinate.
    pub per_coord: Vec<(usize, f64)>,
}

impl SeminormValues {
    /// The weak norm: the maximum over the coordinates.
    pub fn weak_norm(&self) -> f64 {
        self.per_coord.iter().fold(0.0, |m, &(_, v)| m.max(v))
    }
}

/// Grid maximum of |f(x+h) - f(x)| * max(|h|^{-alpha} x_i^{alpha/2},
/// |h|^{-alpha/2}) for each nondegenerate coordinate i.
pub fn weighted_seminorm<F>(f: &F, cls: &InitialClassification, grid: &GridSpec) -> SeminormValues
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let alpha = grid.alpha;
    let per_coord = cls
        .n_c2()
        .iter()
        .map(|&i| {
            let mut best: f64 = 0.0;
            for (coord, h) in &grid.displacements {
                if *coord != i {
                    continue;
                }
                let h_norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                for x in &grid.base_points {
                    let shifted: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + b).collect();
                    let diff = (f(&shifted) - f(x)).abs();
                    let weight = (h_norm.powf(-alpha) * x[i - 1].powf(alpha / 2.0))
                        .max(h_norm.powf(-alpha / 2.0));
                    best = best.max(diff * weight);
                }
            }
            (i, best)
        })
        .collect();
    SeminormValues { per_coord }
}

/// Semigroup-norm estimate: grid maximum of |P_t f - f| / t^{alpha/2}
/// with the Monte Carlo band of the maximizing entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SemigroupNormEstimate {
    pub value: f64,
    /// Stderr of the entry attaining the maximum, in norm units.
    pub band: f64,
    pub argmax_t: f64,
}

enum Evaluand<'a> {
    Closed(&'a TestFunction),
    Generic(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

impl Evaluand<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Evaluand::Closed(f) => f.eval(x),
            Evaluand::Generic(g) => g(x),
        }
    }

    fn pt(
        &self,
        frozen: &FrozenCoefficients,
        cls: &InitialClassification,
        x: &[f64],
        t: f64,
        cfg: &McConfig,
    ) -> Result<Estimate> {
        match self {
            Evaluand::Closed(f) => pt_f(frozen, cls, x, t, f, cfg),
            Evaluand::Generic(g) => pt_generic(frozen, cls, x, t, *g, cfg),
        }
    }
}

fn semigroup_norm_impl(
    f: &Evaluand,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    alpha: f64,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
) -> Result<SemigroupNormEstimate> {
    assert!(alpha > 0.0 && alpha < 1.0);
    if t_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = SemigroupNormEstimate {
        value: 0.0,
        band: 0.0,
        argmax_t: t_grid[0],
    };
    for (ti, &t) in t_grid.iter().enumerate() {
        assert!(t > 0.0);
        let scale = t.powf(-alpha / 2.0);
        for (xi, x) in x_grid.iter().enumerate() {
            // the seed depends on the grid cell only, so scaled copies of
            // f share every sampled path
            let cfg = McConfig {
                seed: sub_seed(mc.seed, &format!("sgnorm-{ti}-{xi}")),
                ..*mc
            };
            let est = f.pt(frozen, cls, x, t, &cfg)?;
            let value = (est.mean - f.eval(x)).abs() * scale;
            if value > best.value {
                best = SemigroupNormEstimate {
                    value,
                    band: est.stderr * scale,
                    argmax_t: t,
                };
            }
        }
    }
    Ok(best)
}

/// Semigroup norm of a test function (closed-form inner integral).
pub fn semigroup_norm(
    f: &TestFunction,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    alpha: f64,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
) -> Result<SemigroupNormEstimate> {
    semigroup_norm_impl(&Evaluand::Closed(f), frozen, cls, alpha, t_grid, x_grid, mc)
}

/// Semigroup norm of an arbitrary bounded function (quadrature inner
/// integral).
pub fn semigroup_norm_generic<G>(
    g: &G,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    alpha: f64,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
) -> Result<SemigroupNormEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    semigroup_norm_impl(&Evaluand::Generic(g), frozen, cls, alpha, t_grid, x_grid, mc)
}

/// Norm comparison for one function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub per_coord: Vec<(usize, f64)>,
    pub weak_norm: f64,
    /// weak norm plus the sup bound: the full weighted-Hoelder norm.
    pub full_norm: f64,
    pub semigroup: SemigroupNormEstimate,
    /// semigroup norm / weak norm.
    pub ratio: f64,
}

/// Compute both norms for one test function.
pub fn norm_report(
    f: &TestFunction,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    grid: &GridSpec,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
) -> Result<NormReport> {
    let sem = weighted_seminorm(&|x: &[f64]| f.eval(x), cls, grid);
    let weak = sem.weak_norm();
    let sg = semigroup_norm(f, frozen, cls, grid.alpha, t_grid, x_grid, mc)?;
    Ok(NormReport {
        per_coord: sem.per_coord,
        weak_norm: weak,
        full_norm: weak + f.bound(),
        semigroup: sg,
        ratio: sg.value / weak,
    })
}

/// Outcome of the norm-equivalence experiment over a function family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread_bound: f64,
    pub passed: bool,
}

/// Ratio semigroup-norm / weak-norm per family member; passes when every
/// ratio is finite and positive and the spread stays within the bound.
pub fn equivalence_check(
    family: &[TestFunction],
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    grid: &GridSpec,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
    spread_bound: f64,
) -> Result<EquivalenceReport> {
    if family.len() < 10 {
        return Err(Error::Config(format!(
            "equivalence check needs at least 10 functions, got {}",
            family.len()
        )));
    }
    let mut ratios = Vec::with_capacity(family.len());
    for f in family {
        let report = norm_report(f, frozen, cls, grid, t_grid, x_grid, mc)?;
        if report.weak_norm == 0.0 {
            // a constant-like member: 0/0 unless the semigroup norm is
            // also zero beyond Monte Carlo noise
            if report.semigroup.value > 4.0 * report.semigroup.band {
                return Err(Error::DegenerateFamily);
            }
            return Err(Error::DegenerateFamily);
        }
        ratios.push(report.ratio);
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
    let passed = min_ratio > 0.0
        && max_ratio.is_finite()
        && max_ratio / min_ratio <= spread_bound;
    Ok(EquivalenceReport {
        ratios,
        min_ratio,
        max_ratio,
        spread_bound,
        passed,
    })
}

/// Outcome of the product-rule experiment for one pair (f, g).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductRuleReport {
    /// Semigroup norm of the pointwise product fg.
    pub lhs: f64,
    pub weak_f: f64,
    pub bound_f: f64,
    pub bound_g: f64,
    pub semigroup_g: f64,
    /// Smallest c with lhs <= c * weak_f * bound_g + bound_f *
    /// semigroup_g on this grid.
    pub c_fit: f64,
}

/// Check |fg|_alpha <= c |f|_weak ||g|| + ||f|| |g|_alpha with a fitted c.
pub fn product_rule_check(
    f: &TestFunction,
    g: &TestFunction,
    frozen: &FrozenCoefficients,
    cls: &InitialClassification,
    grid: &GridSpec,
    t_grid: &[f64],
    x_grid: &[Vec<f64>],
    mc: &McConfig,
) -> Result<ProductRuleReport> {
    let weak_f = weighted_seminorm(&|x: &[f64]| f.eval(x), cls, grid).weak_norm();
    let sg_g = semigroup_norm(g, frozen, cls, grid.alpha, t_grid, x_grid, mc)?;
    let product = |x: &[f64]| f.eval(x) * g.eval(x);
    let lhs = semigroup_norm_generic(&product, frozen, cls, grid.alpha, t_grid, x_grid, mc)?;
    let c_fit = if weak_f * g.bound() > 0.0 {
        ((lhs.value - f.bound() * sg_g.value) / (weak_f * g.bound())).max(0.0)
    } else {
        0.0
    };
    Ok(ProductRuleReport {
        lhs: lhs.value,
        weak_f,
        bound_f: f.bound(),
        bound_g: g.bound(),
        semigroup_g: sg_g.value,
        c_fit,
    })
}
