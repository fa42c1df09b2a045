//! Bounded test functions with exact one-dimensional Gaussian
//! convolutions, and Gauss-Hermite quadrature for the factors (and
//! oracles) that lack a closed form.
//!
//! A test function is a scaled product of per-coordinate factors.  The
//! semigroup representation integrates the N_R coordinates against a
//! Gaussian density, so every factor allowed on an N_R coordinate either
//! knows its own Gaussian convolution in closed form or is integrated by
//! quadrature.

use serde::{Deserialize, Serialize};

/// One-dimensional factor of a test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// Constant 1.
    One,
    /// cos(freq * u + phase).
    Cos { freq: f64, phase: f64 },
    /// exp(-(u - center)^2 / (2 width^2)).
    GaussBump { center: f64, width: f64 },
    /// exp(-rate * u); bounded only on u >= 0, so restricted to the
    /// nonnegative coordinates.
    ExpDecay { rate: f64 },
    /// Smoothed indicator Phi((u - center) / width), Phi the standard
    /// normal CDF.
    SmoothStep { center: f64, width: f64 },
    /// Quartic window ((1 - ((u-center)/half_width)^2)^2 inside, 0
    /// outside).  No closed-form Gaussian convolution; integrated by
    /// quadrature when it lands on an N_R coordinate.
    Window { center: f64, half_width: f64 },
}

impl Factor {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Factor::One => 1.0,
            Factor::Cos { freq, phase } => (freq * u + phase).cos(),
            Factor::GaussBump { center, width } => {
                (-(u - center).powi(2) / (2.0 * width * width)).exp()
            }
            Factor::ExpDecay { rate } => (-rate * u).exp(),
            Factor::SmoothStep { center, width } => normal_cdf((u - center) / width),
            Factor::Window { center, half_width } => {
                let s = (u - center) / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - s * s).powi(2)
                }
            }
        }
    }

    /// Sup of |factor| over its domain (u >= 0 for ExpDecay).
    pub fn bound(&self) -> f64 {
        1.0
    }

    /// Closed-form integral of the factor against a Gaussian density with
    /// the given mean and variance, when available.
    pub fn convolve_gaussian(&self, mean: f64, variance: f64) -> Option<f64> {
        if variance == 0.0 {
            return Some(self.eval(mean));
        }
        match *self {
            Factor::One => Some(1.0),
            Factor::Cos { freq, phase } => {
                Some((-0.5 * freq * freq * variance).exp() * (freq * mean + phase).cos())
            }
            Factor::GaussBump { center, width } => {
                let total = width * width + variance;
                Some((width * width / total).sqrt() * (-(mean - center).powi(2) / (2.0 * total)).exp())
            }
            Factor::SmoothStep { center, width } => {
                Some(normal_cdf((mean - center) / (width * width + variance).sqrt()))
            }
            Factor::ExpDecay { .. } | Factor::Window { .. } => None,
        }
    }

    /// Gaussian convolution by order-64 Gauss-Hermite quadrature; the
    /// fallback for factors without a closed form and the oracle for those
    /// with one.
    pub fn convolve_gaussian_quadrature(&self, mean: f64, variance: f64) -> f64 {
        if variance == 0.0 {
            return self.eval(mean);
        }
        let gh = gauss_hermite(64);
        let scale = (2.0 * variance).sqrt();
        let mut acc = 0.0;
        for (node, weight) in gh.nodes.iter().zip(&gh.weights) {
            acc += weight * self.eval(mean + scale * node);
        }
        acc / std::f64::consts::PI.sqrt()
    }
}

/// Bounded test function: scale times a product of per-coordinate factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub scale: f64,
    pub factors: Vec<Factor>,
}

impl TestFunction {
    pub fn constant(d: usize, value: f64) -> Self {
        Self {
            scale: value,
            factors: vec![Factor::One; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.scale
            * self
                .factors
                .iter()
                .zip(x)
                .map(|(f, &u)| f.eval(u))
                .product::<f64>()
    }

    /// Sup-norm bound.
    pub fn bound(&self) -> f64 {
        self.scale.abs() * self.factors.iter().map(Factor::bound).product::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            factors: self.factors.clone(),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Error function, accurate to near machine precision: Taylor series for
/// small arguments, Lentz continued fraction for the tail.
pub fn erf(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.0 {
        // alternating Taylor series
        let mut term = ax;
        let mut sum = ax;
        let x2 = ax * ax;
        let mut n = 0usize;
        while term.abs() > 1e-18 * sum.abs().max(1.0) && n < 200 {
            n += 1;
            term *= -x2 / n as f64;
            sum += term / (2.0 * n as f64 + 1.0);
        }
        let v = 2.0 / std::f64::consts::PI.sqrt() * sum;
        v.copysign(x)
    } else {
        (1.0 - erfc_cf(ax)).copysign(x)
    }
}

/// erfc by the continued fraction
/// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated with the modified Lentz algorithm.  Valid for x >= 1 or so.
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f: f64 = x;
    let mut c: f64 = x;
    let mut d: f64 = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

/// Nodes and weights for integrating exp(-t^2) g(t) dt over the line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss-Hermite rule by Newton iteration on the orthonormal Hermite
/// recurrence.
pub fn gauss_hermite(n: usize) -> GaussHermite {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut roots: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        // standard initial guesses for the largest roots downward
        let mut z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => roots[0] - 1.14 * nf.powf(0.426) / roots[0],
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = std::f64::consts::PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        roots.push(z);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    GaussHermite { nodes, weights }
}
