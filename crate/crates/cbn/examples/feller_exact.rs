//! Exact sampling of one Feller branching immigration diffusion: the
//! transition law, the extinction probability, and the Poisson cluster
//! decomposition.
//!
//! Run with: cargo run --example feller_exact

use cbn::feller::{
    cluster_sample, exact_transition_sample, extinction_probability, path_sample, FellerParams,
};
use cbn::rng::path_rng;
use cbn::stats::{binomial_stderr, Estimate};

fn main() {
    let p = FellerParams::new(1.0, 1.0, 1.0);
    let t = 1.0;
    let n = 50_000;

    // exact transition sampling: E x_t = x + b t
    let samples: Vec<f64> = (0..n)
        .map(|k| {
            let mut rng = path_rng(1, k as u64);
            exact_transition_sample(&p, t, &mut rng)
        })
        .collect();
    let est = Estimate::from_samples(&samples);
    println!(
        "transition mean at t={t}: {:.4} +- {:.4} (exact {})",
        est.mean,
        est.stderr,
        p.x + p.b * t
    );

    // extinction law for the immigration-free process
    let q = FellerParams::new(1.0, 0.0, 1.0);
    let survived = (0..n)
        .filter(|&k| {
            let mut rng = path_rng(2, k as u64);
            exact_transition_sample(&q, t, &mut rng) > 0.0
        })
        .count();
    let freq = survived as f64 / n as f64;
    let law = extinction_probability(q.x, q.gamma, t);
    println!(
        "survival frequency: {freq:.4} vs closed form {law:.4} (se {:.4})",
        binomial_stderr(law, n)
    );

    // cluster decomposition: Poisson many exponential levels
    let mut rng = path_rng(3, 0);
    let c = cluster_sample(1.0, 1.0, 1.0, &mut rng);
    println!(
        "one cluster draw: {} surviving clusters, total mass {:.4}",
        c.n, c.total
    );

    // a path skeleton with its occupation integral
    let path = path_sample(&p, 1.0, 8, &mut rng);
    println!("path knots: {:?}", path.values);
    println!("occupation integral: {:.4}", path.integral);
}
