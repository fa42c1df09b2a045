//! Coefficient fields b, gamma over the nonnegative orthant, the frozen
//! constants of the reference generator, and the tilde/perturbation
//! decomposition.
//!
//! Fields are closed expression trees (constant | affine | bump | product)
//! rather than arbitrary closures, so they can round-trip through JSON
//! configs and perturbation sizes can be controlled exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BranchingNetwork, InitialClassification};

/// Piecewise-linear localization ramp: 1 on [0, r], 0 on [2r, inf),
/// linear in between.
pub fn ramp(dist: f64, r: f64) -> f64 {
    if dist <= r {
        1.0
    } else if dist >= 2.0 * r {
        0.0
    } else {
        2.0 - dist / r
    }
}

/// Scalar expression over points of the orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Constant { value: f64 },
    /// intercept + <slopes, x>, optionally floored from below.
    Affine {
        intercept: f64,
        slopes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    /// base + amplitude * ramp(|x - center|, radius).
    Bump {
        base: f64,
        amplitude: f64,
        center: Vec<f64>,
        radius: f64,
    },
    Product { factors: Vec<Expr> },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Constant { value }
    }

    /// The coordinate projection x -> x_i (1-based).
    pub fn coord(i: usize, d: usize) -> Self {
        let mut slopes = vec![0.0; d];
        slopes[i - 1] = 1.0;
        Expr::Affine {
            intercept: 0.0,
            slopes,
            floor: None,
        }
    }

    /// x -> sum of x_k over the given (1-based) coordinates.
    pub fn coord_sum(coords: &[usize], d: usize) -> Self {
        let mut slopes = vec![0.0; d];
        for &k in coords {
            slopes[k - 1] = 1.0;
        }
        Expr::Affine {
            intercept: 0.0,
            slopes,
            floor: None,
        }
    }

    pub fn times(self, other: Expr) -> Self {
        Expr::Product {
            factors: vec![self, other],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Constant { value } => *value,
            Expr::Affine {
                intercept,
                slopes,
                floor,
            } => {
                let v = intercept + slopes.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>();
                match floor {
                    Some(lo) => v.max(*lo),
                    None => v,
                }
            }
            Expr::Bump {
                base,
                amplitude,
                center,
                radius,
            } => {
                let dist = center
                    .iter()
                    .zip(x)
                    .map(|(c, xi)| (xi - c).powi(2))
                    .sum::<f64>()
                    .sqrt();
                base + amplitude * ramp(dist, *radius)
            }
            Expr::Product { factors } => factors.iter().map(|f| f.eval(x)).product(),
        }
    }
}

/// Per-vertex drift and branching-rate evaluators with declared regularity
/// metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    /// b_j evaluators, one per vertex.
    pub b: Vec<Expr>,
    /// gamma_j evaluators, one per vertex; must be positive wherever used.
    pub gamma: Vec<Expr>,
    /// Declared Hoelder index of the field, in (0, 1).
    pub alpha: f64,
    /// Declared linear-growth constant: |b_j(x)| <= c (1 + |x|).
    pub growth_c: f64,
    /// Radius outside which the field is declared constant, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_outside_radius: Option<f64>,
}

impl CoefficientField {
    /// Constant field b_j = b, gamma_j = g for every vertex.
    pub fn constant(d: usize, b: f64, g: f64) -> Self {
        Self {
            b: vec![Expr::constant(b); d],
            gamma: vec![Expr::constant(g); d],
            alpha: 0.5,
            growth_c: b.abs().max(1.0),
            constant_outside_radius: Some(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval_checked(&self, expr: &Expr, vertex: usize, x: &[f64]) -> Result<f64> {
        let v = expr.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluationFailure {
                vertex,
                point: x.to_vec(),
            })
        }
    }

    pub fn b_at(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.eval_checked(&self.b[j - 1], j, x)
    }

    pub fn gamma_at(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.eval_checked(&self.gamma[j - 1], j, x)
    }
}

/// One violated regularity condition, with the witnessing sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub vertex: usize,
    pub condition: String,
    pub sample: Vec<f64>,
    pub value: f64,
}

/// Outcome of sample-based regularity validation.  An empty violation list
/// means no violation was found on the given samples, not a proof.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hypothesis2Report {
    pub n_samples: usize,
    pub violations: Vec<Violation>,
}

impl Hypothesis2Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the regularity conditions on a sample set: gamma positivity, the
/// declared linear growth bound on b, b_i >= 0 on {x_i = 0}, and strict
/// positivity there for catalysts and reactants.
pub fn validate_hypothesis2(
    field: &CoefficientField,
    net: &BranchingNetwork,
    samples: &[Vec<f64>],
) -> Result<Hypothesis2Report> {
    let mut violations = Vec::new();
    for x in samples {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 1..=net.dim() {
            let g = field.gamma_at(j, x)?;
            if g <= 0.0 {
                violations.push(Violation {
                    vertex: j,
                    condition: format!("gamma_{j}(x) > 0 fails"),
                    sample: x.clone(),
                    value: g,
                });
            }
            let b = field.b_at(j, x)?;
            if b.abs() > field.growth_c * (1.0 + norm) {
                violations.push(Violation {
                    vertex: j,
                    condition: format!("|b_{j}(x)| <= c(1+|x|) fails with c={}", field.growth_c),
                    sample: x.clone(),
                    value: b,
                });
            }
            if x[j - 1] == 0.0 {
                if b < 0.0 {
                    violations.push(Violation {
                        vertex: j,
                        condition: format!("b_{j}(x) >= 0 at x_{j}=0 fails"),
                        sample: x.clone(),
                        value: b,
                    });
                }
                if (net.is_catalyst(j) || net.is_reactant(j)) && b <= 0.0 {
                    violations.push(Violation {
                        vertex: j,
                        condition: format!("b_{j}(x) > 0 at x_{j}=0 fails"),
                        sample: x.clone(),
                        value: b,
                    });
                }
            }
        }
    }
    Ok(Hypothesis2Report {
        n_samples: samples.len(),
        violations,
    })
}

/// Frozen constants of the reference generator at an initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenCoefficients {
    pub b0: Vec<f64>,
    pub gamma0: Vec<f64>,
}

/// Freeze the field at the classification's initial point.
///
/// For j in N_R: gamma0_j = gamma_j(x0) x0_j.  For i in N_C or N_2:
/// gamma0_i picks up the catalyst mass if i is a reactant, and the drift is
/// clipped at zero on N_2.  The sign conditions on the result are verified
/// and a violation is reported as `FrozenDegenerate`.
pub fn freeze(
    field: &CoefficientField,
    net: &BranchingNetwork,
    cls: &InitialClassification,
) -> Result<FrozenCoefficients> {
    let d = net.dim();
    let x0 = &cls.x0;
    let mut b0 = vec![0.0; d];
    let mut gamma0 = vec![0.0; d];
    for v in 1..=d {
        let b = field.b_at(v, x0)?;
        let g = field.gamma_at(v, x0)?;
        if cls.in_n_r(v) {
            b0[v - 1] = b;
            gamma0[v - 1] = g * x0[v - 1];
        } else {
            b0[v - 1] = if cls.n_2.contains(&v) { b.max(0.0) } else { b };
            gamma0[v - 1] = if net.is_reactant(v) {
                g * net.catalyst_sum(v, x0)
            } else {
                g
            };
        }
    }
    let frozen = FrozenCoefficients { b0, gamma0 };
    check_frozen_signs(&frozen, net, cls)?;
    Ok(frozen)
}

fn check_frozen_signs(
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
) -> Result<()> {
    for v in 1..=net.dim() {
        if frozen.gamma0[v - 1] <= 0.0 {
            return Err(Error::FrozenDegenerate(format!(
                "gamma0_{v} = {} <= 0",
                frozen.gamma0[v - 1]
            )));
        }
        if !cls.in_n_r(v) && frozen.b0[v - 1] < 0.0 {
            return Err(Error::FrozenDegenerate(format!(
                "b0_{v} = {} < 0 outside N_R",
                frozen.b0[v - 1]
            )));
        }
        let in_rc = net.is_reactant(v) || net.is_catalyst(v);
        if in_rc && cls.zero.contains(&v) && frozen.b0[v - 1] <= 0.0 {
            return Err(Error::FrozenDegenerate(format!(
                "b0_{v} = {} not strictly positive for a vanishing catalyst/reactant",
                frozen.b0[v - 1]
            )));
        }
    }
    Ok(())
}

/// The constant M0 controlling every estimate downstream: the largest of
/// gamma0, 1/gamma0, |b0| over all vertices, and 1/b0 over vanishing
/// catalysts/reactants.
pub fn m0(
    frozen: &FrozenCoefficients,
    net: &BranchingNetwork,
    cls: &InitialClassification,
) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for v in 1..=net.dim() {
        let g = frozen.gamma0[v - 1];
        m = m.max(g).max(1.0 / g).max(frozen.b0[v - 1].abs());
    }
    for v in 1..=net.dim() {
        let in_rc = net.is_reactant(v) || net.is_catalyst(v);
        if in_rc && cls.zero.contains(&v) {
            m = m.max(1.0 / frozen.b0[v - 1]);
        }
    }
    m
}

/// The localized coefficient family whose generator the frozen one
/// approximates: gamma picks up the degenerate state factors.
pub fn tilde_field(
    field: &CoefficientField,
    net: &BranchingNetwork,
    cls: &InitialClassification,
) -> CoefficientField {
    let d = net.dim();
    let gamma = (1..=d)
        .map(|v| {
            let g = field.gamma[v - 1].clone();
            if cls.in_n_r(v) {
                g.times(Expr::coord(v, d))
            } else if net.is_reactant(v) {
                g.times(Expr::coord_sum(net.catalysts_of(v), d))
            } else {
                g
            }
        })
        .collect();
    CoefficientField {
        b: field.b.clone(),
        gamma,
        alpha: field.alpha,
        growth_c: field.growth_c,
        constant_outside_radius: field.constant_outside_radius,
    }
}

/// Sample-sup estimate of the total perturbation size: the sum over
/// vertices of sup |gamma~ - gamma0| + sup |b~ - b0|.  A lower bound on
/// the true sup, monotone in the sample set.
pub fn perturbation_size(
    tilde: &CoefficientField,
    frozen: &FrozenCoefficients,
    samples: &[Vec<f64>],
) -> Result<f64> {
    let mut total = 0.0;
    for v in 1..=tilde.dim() {
        let mut sup_g: f64 = 0.0;
        let mut sup_b: f64 = 0.0;
        for x in samples {
            sup_g = sup_g.max((tilde.gamma_at(v, x)? - frozen.gamma0[v - 1]).abs());
            sup_b = sup_b.max((tilde.b_at(v, x)? - frozen.b0[v - 1]).abs());
        }
        total += sup_g + sup_b;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_catalyst() -> (BranchingNetwork, InitialClassification) {
        let net = BranchingNetwork::new(3, [(1, 2), (3, 2)]).unwrap();
        let cls = net.classify_initial(&[0.0, 1.0, 0.0]).unwrap();
        (net, cls)
    }

    #[test]
    fn ramp_shape() {
        assert_eq!(ramp(0.0, 1.0), 1.0);
        assert_eq!(ramp(1.0, 1.0), 1.0);
        assert_eq!(ramp(1.5, 1.0), 0.5);
        assert_eq!(ramp(2.0, 1.0), 0.0);
        assert_eq!(ramp(5.0, 1.0), 0.0);
    }

    #[test]
    fn hypothesis2_constants_pass() {
        let (net, _) = two_catalyst();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let samples = vec![vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]];
        assert!(validate_hypothesis2(&field, &net, &samples)
            .unwrap()
            .passed());
    }

    #[test]
    fn hypothesis2_catches_boundary_drift() {
        let (net, _) = two_catalyst();
        let mut field = CoefficientField::constant(3, 1.0, 1.0);
        field.b[0] = Expr::constant(-1.0);
        let report =
            validate_hypothesis2(&field, &net, &[vec![0.0, 1.0, 1.0]]).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.vertex == 1 && v.condition.contains("> 0 at x_1=0")));
    }

    #[test]
    fn hypothesis2_catches_growth() {
        let net = BranchingNetwork::new(1, []).unwrap();
        let mut field = CoefficientField::constant(1, 1.0, 1.0);
        // b_1(x) = x_1^2 as a product of coordinates
        field.b[0] = Expr::coord(1, 1).times(Expr::coord(1, 1));
        field.growth_c = 1.0;
        let report = validate_hypothesis2(&field, &net, &[vec![10.0]]).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.condition.contains("c(1+|x|)")));
    }

    #[test]
    fn freeze_two_catalyst_constants() {
        let (net, cls) = two_catalyst();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let frozen = freeze(&field, &net, &cls).unwrap();
        assert_eq!(frozen.b0, vec![1.0, 1.0, 1.0]);
        assert_eq!(frozen.gamma0, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn freeze_clips_n2_drift() {
        let net = BranchingNetwork::new(1, []).unwrap();
        let cls = net.classify_initial(&[1.0]).unwrap();
        let mut field = CoefficientField::constant(1, -2.0, 1.0);
        field.growth_c = 2.0;
        let frozen = freeze(&field, &net, &cls).unwrap();
        assert_eq!(frozen.b0, vec![0.0]);
    }

    #[test]
    fn freeze_plain_gamma_off_reactants() {
        let net = BranchingNetwork::new(1, []).unwrap();
        let cls = net.classify_initial(&[2.0]).unwrap();
        let field = CoefficientField::constant(1, 0.0, 2.0);
        let frozen = freeze(&field, &net, &cls).unwrap();
        assert_eq!(frozen.gamma0, vec![2.0]);
    }

    #[test]
    fn freeze_rejects_degenerate() {
        let (net, cls) = two_catalyst();
        let mut field = CoefficientField::constant(3, 1.0, 1.0);
        // vertex 2 in N_R with x0_2 = 1 keeps gamma0_2 fine, but a zero
        // drift at the vanishing catalyst 1 violates the strict condition
        field.b[0] = Expr::constant(0.0);
        assert!(matches!(
            freeze(&field, &net, &cls),
            Err(Error::FrozenDegenerate(_))
        ));
    }

    #[test]
    fn m0_values() {
        let (net, cls) = two_catalyst();
        let frozen = FrozenCoefficients {
            b0: vec![1.0, 1.0, 1.0],
            gamma0: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(m0(&frozen, &net, &cls), 1.0);
        let frozen2 = FrozenCoefficients {
            b0: vec![1.0, 1.0, 1.0],
            gamma0: vec![2.0, 1.0, 1.0],
        };
        let net2 = BranchingNetwork::new(3, []).unwrap();
        let cls2 = net2.classify_initial(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m0(&frozen2, &net2, &cls2), 2.0);
        // vanishing catalyst with small b0 dominates through 1/b0
        let frozen3 = FrozenCoefficients {
            b0: vec![0.1, 1.0, 1.0],
            gamma0: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(m0(&frozen3, &net, &cls), 10.0);
    }

    #[test]
    fn m0_at_least_one() {
        for g in [0.25, 0.5, 1.0, 3.0] {
            let net = BranchingNetwork::new(1, []).unwrap();
            let cls = net.classify_initial(&[1.0]).unwrap();
            let frozen = FrozenCoefficients {
                b0: vec![0.0],
                gamma0: vec![g],
            };
            assert!(m0(&frozen, &net, &cls) >= 1.0);
        }
    }

    #[test]
    fn tilde_picks_up_state_factors() {
        let (net, cls) = two_catalyst();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let tilde = tilde_field(&field, &net, &cls);
        // vertex 2 in N_R: gamma~_2(x) = x_2
        assert_eq!(tilde.gamma_at(2, &[5.0, 3.0, 7.0]).unwrap(), 3.0);
        // vertices 1 and 3 are not reactants: unchanged
        assert_eq!(tilde.gamma_at(1, &[5.0, 3.0, 7.0]).unwrap(), 1.0);
    }

    #[test]
    fn tilde_reactant_in_n2() {
        let net = BranchingNetwork::new(2, [(1, 2)]).unwrap();
        let cls = net.classify_initial(&[1.0, 1.0]).unwrap();
        let field = CoefficientField::constant(2, 1.0, 1.0);
        let tilde = tilde_field(&field, &net, &cls);
        // vertex 2 in N_2 and a reactant with C_2 = {1}: gamma~_2(x) = x_1
        assert_eq!(tilde.gamma_at(2, &[4.0, 9.0]).unwrap(), 4.0);
    }

    #[test]
    fn perturbation_size_cases() {
        let (net, cls) = two_catalyst();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let frozen = freeze(&field, &net, &cls).unwrap();
        // field identical to the frozen constants
        let exact = CoefficientField {
            b: vec![Expr::constant(1.0); 3],
            gamma: vec![Expr::constant(1.0); 3],
            ..field.clone()
        };
        let samples = vec![vec![0.0, 1.0, 0.0], vec![0.1, 1.1, 0.1]];
        assert_eq!(perturbation_size(&exact, &frozen, &samples).unwrap(), 0.0);

        let mut offset = exact.clone();
        offset.gamma[0] = Expr::constant(1.01);
        let size = perturbation_size(&offset, &frozen, &samples).unwrap();
        assert!((size - 0.01).abs() < 1e-12);

        // gamma~_2(x) = x_2 against gamma0_2 = 1 on x_2 in [0.9, 1.1]
        let tilde = tilde_field(&field, &net, &cls);
        let samples = vec![vec![0.0, 0.9, 0.0], vec![0.0, 1.1, 0.0]];
        let size = perturbation_size(&tilde, &frozen, &samples).unwrap();
        assert!((size - 0.1).abs() < 1e-12, "size = {size}");
    }

    #[test]
    fn perturbation_size_shrinks_with_radius() {
        let (net, cls) = two_catalyst();
        let field = CoefficientField::constant(3, 1.0, 1.0);
        let frozen = freeze(&field, &net, &cls).unwrap();
        let tilde = tilde_field(&field, &net, &cls);
        let mut last = f64::INFINITY;
        for r in [0.5, 0.25, 0.125, 0.0625] {
            let samples: Vec<Vec<f64>> = vec![
                vec![r, 1.0 - r, r],
                vec![0.0, 1.0 + r, 0.0],
                vec![r, 1.0, 0.0],
            ];
            let size = perturbation_size(&tilde, &frozen, &samples).unwrap();
            assert!(size <= last);
            last = size;
        }
    }

    #[test]
    fn expr_json_round_trip() {
        let e = Expr::Bump {
            base: 1.0,
            amplitude: 0.05,
            center: vec![0.0, 1.0, 0.0],
            radius: 0.5,
        }
        .times(Expr::coord(2, 3));
        let s = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(e, back);
    }
}
