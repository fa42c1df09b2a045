//! Feller branching diffusions with immigration: exact transition
//! sampling, extinction law, the Poisson cluster decomposition, and path
//! skeletons with occupation integrals.
//!
//! The process has generator `b d/dx + gamma x d^2/dx^2`, i.e. the SDE
//! `dx = b dt + sqrt(2 gamma x) dB`.  Its transition law is a scaled
//! noncentral chi-square with fractional degrees of freedom, realized here
//! as a Poisson mixture of Gamma variates: with `N ~ Poisson(x / (gamma t))`
//! the value at time t is `Gamma(b/gamma + N, scale = gamma t)`, zero when
//! the shape vanishes.  The sampler is validated against an Euler-Maruyama
//! oracle in the tests.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::{Deserialize, Serialize};

/// Parameters of one Feller branching immigration diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerParams {
    /// Initial value, >= 0.
    pub x: f64,
    /// Immigration rate, >= 0.
    pub b: f64,
    /// Branching rate, > 0.
    pub gamma: f64,
}

impl FellerParams {
    pub fn new(x: f64, b: f64, gamma: f64) -> Self {
        assert!(x >= 0.0 && b >= 0.0 && gamma > 0.0);
        Self { x, b, gamma }
    }
}

/// Draw one exact sample of the time-t marginal.
pub fn exact_transition_sample<R: Rng + ?Sized>(p: &FellerParams, t: f64, rng: &mut R) -> f64 {
    assert!(t > 0.0);
    let scale = p.gamma * t;
    let n = if p.x == 0.0 {
        0u64
    } else {
        Poisson::new(p.x / scale).unwrap().sample(rng) as u64
    };
    let shape = p.b / p.gamma + n as f64;
    if shape == 0.0 {
        return 0.0;
    }
    Gamma::new(shape, scale).unwrap().sample(rng)
}

/// Survival probability of a mass-h cluster with no immigration:
/// P[x_t > 0] = 1 - exp(-h / (t gamma)), which is at most h / (t gamma).
pub fn extinction_probability(h: f64, gamma: f64, t: f64) -> f64 {
    assert!(h >= 0.0 && gamma > 0.0 && t > 0.0);
    -(-h / (t * gamma)).exp_m1()
}

/// Poisson cluster decomposition of the time-t marginal (no immigration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    /// Number of clusters surviving to time t.
    pub n: usize,
    /// Mass of each surviving cluster at time t.
    pub levels: Vec<f64>,
    /// Sum of levels.
    pub total: f64,
}

/// Sample the cluster decomposition: `N ~ Poisson(x / (gamma t))` surviving
/// clusters, each with an exponential(mean gamma t) level.  The total is
/// distributed exactly as the b = 0 transition sample.
pub fn cluster_sample<R: Rng + ?Sized>(
    x: f64,
    gamma: f64,
    t: f64,
    rng: &mut R,
) -> ClusterDecomposition {
    assert!(x >= 0.0 && gamma > 0.0 && t > 0.0);
    let n = if x == 0.0 {
        0usize
    } else {
        Poisson::new(x / (gamma * t)).unwrap().sample(rng) as usize
    };
    let level_law = Exp::new(1.0 / (gamma * t)).unwrap();
    let levels: Vec<f64> = (0..n).map(|_| level_law.sample(rng)).collect();
    let total = levels.iter().sum();
    ClusterDecomposition { n, levels, total }
}

/// Time-grid skeleton of one path with its trapezoid occupation integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FellerPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid estimate of the occupation integral over [0, T].
    pub integral: f64,
}

/// Sample a path skeleton by chaining exact transitions over an even grid.
pub fn path_sample<R: Rng + ?Sized>(
    p: &FellerParams,
    horizon: f64,
    n_steps: usize,
    rng: &mut R,
) -> FellerPath {
    assert!(n_steps >= 1 && horizon > 0.0);
    let dt = horizon / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    values.push(p.x);
    let mut current = p.x;
    let mut integral = 0.0;
    for k in 1..=n_steps {
        let next = exact_transition_sample(
            &FellerParams {
                x: current,
                b: p.b,
                gamma: p.gamma,
            },
            dt,
            rng,
        );
        integral += 0.5 * (current + next) * dt;
        current = next;
        times.push(k as f64 * dt);
        values.push(next);
    }
    FellerPath {
        times,
        values,
        integral,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use crate::stats::{binomial_stderr, ks_two_sample, Estimate};

    /// Independent oracle: full-truncation Euler-Maruyama for
    /// dx = b dt + sqrt(2 gamma x) dB.
    fn euler_maruyama_sample<R: Rng + ?Sized>(
        p: &FellerParams,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> f64 {
        use rand_distr::Normal;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n_steps = (t / dt).round() as usize;
        let mut x = p.x;
        for _ in 0..n_steps {
            let xp = x.max(0.0);
            x = x + p.b * dt + (2.0 * p.gamma * xp * dt).sqrt() * normal.sample(rng);
            x = x.max(0.0);
        }
        x
    }

    #[test]
    fn absorbed_at_zero() {
        let mut rng = path_rng(1, 0);
        let p = FellerParams::new(0.0, 0.0, 1.0);
        for _ in 0..100 {
            assert_eq!(exact_transition_sample(&p, 0.7, &mut rng), 0.0);
        }
    }

    #[test]
    fn transition_mean_matches_closed_form() {
        let mut rng = path_rng(2, 0);
        let p = FellerParams::new(1.0, 1.0, 1.0);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| exact_transition_sample(&p, 1.0, &mut rng))
            .collect();
        let est = Estimate::from_samples(&samples);
        // E x_t = x + b t = 2
        assert!(est.z_against(2.0).abs() < 4.0, "z = {}", est.z_against(2.0));
    }

    #[test]
    fn transition_atom_at_zero_matches_extinction_law() {
        let mut rng = path_rng(3, 0);
        let p = FellerParams::new(1.0, 0.0, 1.0);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| exact_transition_sample(&p, 1.0, &mut rng) == 0.0)
            .count();
        let freq = zeros as f64 / n as f64;
        let expected = 1.0 - extinction_probability(1.0, 1.0, 1.0);
        let se = binomial_stderr(expected, n);
        assert!(
            (freq - expected).abs() < 3.0 * se,
            "freq {freq} vs {expected}"
        );
    }

    #[test]
    fn exact_sampler_matches_euler_maruyama_oracle() {
        // the derivation of the Poisson-Gamma mixture is not taken on faith:
        // compare against a fine full-truncation scheme
        let n = 4000;
        for (x, b, gamma, t) in [(1.0, 1.0, 1.0, 1.0), (0.5, 0.0, 2.0, 0.5)] {
            let p = FellerParams::new(x, b, gamma);
            let mut exact = Vec::with_capacity(n);
            let mut em = Vec::with_capacity(n);
            for k in 0..n {
                let mut r1 = path_rng(40, k as u64);
                let mut r2 = path_rng(41, k as u64);
                exact.push(exact_transition_sample(&p, t, &mut r1));
                em.push(euler_maruyama_sample(&p, t, 1e-4, &mut r2));
            }
            let d = ks_two_sample(&exact, &em);
            assert!(d < 0.04, "KS {d} for ({x},{b},{gamma},{t})");
        }
    }

    #[test]
    fn extinction_probability_values() {
        assert_eq!(extinction_probability(0.0, 1.0, 1.0), 0.0);
        assert!((extinction_probability(1.0, 1.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        for (h, g, t) in [(0.3, 0.7, 2.0), (2.0, 1.0, 0.5), (5.0, 3.0, 1.0)] {
            assert!(extinction_probability(h, g, t) <= h / (t * g) + 1e-15);
        }
    }

    #[test]
    fn cluster_sample_zero_mass() {
        let mut rng = path_rng(4, 0);
        let c = cluster_sample(0.0, 1.0, 1.0, &mut rng);
        assert_eq!(c.n, 0);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn cluster_extinction_frequency() {
        let mut rng = path_rng(5, 0);
        let n = 100_000;
        let empty = (0..n)
            .filter(|_| cluster_sample(1.0, 1.0, 1.0, &mut rng).n == 0)
            .count();
        let freq = empty as f64 / n as f64;
        let expected = (-1.0f64).exp();
        assert!((freq - expected).abs() < 3.0 * binomial_stderr(expected, n));
    }

    #[test]
    fn cluster_mass_conservation() {
        let mut rng = path_rng(6, 0);
        let totals: Vec<f64> = (0..100_000)
            .map(|_| cluster_sample(1.0, 1.0, 1.0, &mut rng).total)
            .collect();
        let est = Estimate::from_samples(&totals);
        assert!(est.z_against(1.0).abs() < 4.0);
    }

    #[test]
    fn cluster_total_matches_exact_transition_in_law() {
        let n = 100_000;
        let mut r1 = path_rng(7, 0);
        let mut r2 = path_rng(7, 1);
        let p = FellerParams::new(1.0, 0.0, 1.0);
        let cluster: Vec<f64> = (0..n)
            .map(|_| cluster_sample(1.0, 1.0, 1.0, &mut r1).total)
            .collect();
        let exact: Vec<f64> = (0..n)
            .map(|_| exact_transition_sample(&p, 1.0, &mut r2))
            .collect();
        assert!(ks_two_sample(&cluster, &exact) < 0.01);
    }

    #[test]
    fn martingale_property_without_immigration() {
        let p = FellerParams::new(1.0, 0.0, 1.0);
        for (i, t) in [0.25, 0.5, 1.0, 2.0].into_iter().enumerate() {
            let mut rng = path_rng(8, i as u64);
            let samples: Vec<f64> = (0..100_000)
                .map(|_| exact_transition_sample(&p, t, &mut rng))
                .collect();
            let est = Estimate::from_samples(&samples);
            assert!(est.z_against(1.0).abs() < 3.0, "t={t}");
        }
    }

    #[test]
    fn branching_additivity() {
        let n = 100_000;
        let mut r1 = path_rng(9, 0);
        let mut r2 = path_rng(9, 1);
        let whole = FellerParams::new(1.5, 0.0, 1.0);
        let a = FellerParams::new(1.0, 0.0, 1.0);
        let b = FellerParams::new(0.5, 0.0, 1.0);
        let xs: Vec<f64> = (0..n)
            .map(|_| exact_transition_sample(&whole, 1.0, &mut r1))
            .collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| {
                exact_transition_sample(&a, 1.0, &mut r2)
                    + exact_transition_sample(&b, 1.0, &mut r2)
            })
            .collect();
        assert!(ks_two_sample(&xs, &ys) < 0.01);
    }

    #[test]
    fn path_zero_everything() {
        let mut rng = path_rng(10, 0);
        let path = path_sample(&FellerParams::new(0.0, 0.0, 1.0), 1.0, 16, &mut rng);
        assert!(path.values.iter().all(|&v| v == 0.0));
        assert_eq!(path.integral, 0.0);
    }

    #[test]
    fn path_nonnegative_knots() {
        let mut rng = path_rng(11, 0);
        for _ in 0..200 {
            let path = path_sample(&FellerParams::new(0.3, 0.2, 2.0), 1.0, 32, &mut rng);
            assert!(path.values.iter().all(|&v| v >= 0.0));
            assert!(path.integral >= 0.0);
        }
    }

    #[test]
    fn path_integral_mean_matches_closed_form() {
        // E int_0^T x_s ds = x T + b T^2 / 2 = 1.5 for x = b = T = 1
        let integrals: Vec<f64> = (0..100_000)
            .map(|k| {
                let mut rng = path_rng(12, k as u64);
                path_sample(&FellerParams::new(1.0, 1.0, 1.0), 1.0, 64, &mut rng).integral
            })
            .collect();
        let est = Estimate::from_samples(&integrals);
        assert!(est.z_against(1.5).abs() < 4.0, "z = {}", est.z_against(1.5));
    }

    #[test]
    fn path_integral_refinement_consistency() {
        // trapezoid on the exact skeleton is unbiased for the mean, so the
        // ensemble means at n and 2n steps agree within MC noise
        let mean_at = |steps: usize, seed: u64| {
            let integrals: Vec<f64> = (0..20_000)
                .map(|k| {
                    let mut rng = path_rng(seed, k as u64);
                    path_sample(&FellerParams::new(1.0, 1.0, 1.0), 1.0, steps, &mut rng).integral
                })
                .collect();
            Estimate::from_samples(&integrals)
        };
        let coarse = mean_at(32, 13);
        let fine = mean_at(64, 14);
        let combined = (coarse.stderr.powi(2) + fine.stderr.powi(2)).sqrt();
        assert!((coarse.mean - fine.mean).abs() < 4.0 * combined);
    }
}
