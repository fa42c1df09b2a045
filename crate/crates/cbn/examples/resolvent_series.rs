//! The Monte Carlo resolvent, the perturbation operator B, the key
//! contraction probe, and the Neumann-type perturbation series.
//!
//! Run with: cargo run --example resolvent_series

use cbn::resolvent::{
    key_estimate_probe, perturbation_series, r_lambda, BoxGrid, ResolventConfig, Target,
};
use cbn::testfn::TestFunction;
use cbn::verify::{near_frozen_tilde, two_catalyst_fixture};

fn main() -> cbn::Result<()> {
    let (net, cls, frozen, _) = two_catalyst_fixture();
    let x0 = [0.0, 1.0, 0.0];

    // R_lambda 1 = 1 / lambda
    let one = TestFunction::constant(3, 1.0);
    for lambda in [1.0, 4.0, 16.0] {
        let cfg = ResolventConfig::new(lambda, 500, 1);
        let est = r_lambda(Target::Closed(&one), &frozen, &cls, &x0, &cfg)?;
        println!(
            "R_{lambda} 1 = {:.5} +- {:.5} (exact {:.5})",
            est.estimate.mean,
            est.estimate.stderr,
            1.0 / lambda
        );
    }

    // contraction of B R_lambda for a small perturbation
    let tilde = near_frozen_tilde(0.05);
    let f = cbn::verify::five_functions()[0].clone();
    let probe = key_estimate_probe(
        &f,
        &tilde,
        &frozen,
        &net,
        &cls,
        &[vec![0.0, 1.0, 0.0], vec![0.1, 1.0, 0.1]],
        &[1.0, 8.0, 64.0],
        300,
        2,
    )?;
    println!("perturbation size: {:.4}", probe.epsilon);
    for p in &probe.points {
        println!(
            "  lambda {:>4}: sup |B R f| / ||f|| = {:.5} (noise {:.5})",
            p.lambda, p.ratio, p.noise
        );
    }

    // three terms of the perturbation series at one point
    let grid = BoxGrid::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0], vec![3, 5, 3]);
    let series = perturbation_series(
        &f, &tilde, &frozen, &net, &cls, &grid, &x0, 8.0, 3, 300, 3,
    )?;
    println!("term sup-norms: {:?}", series.term_norms);
    println!("decay ratios:   {:?}", series.decay_ratios);
    println!(
        "partial sums of the perturbed resolvent: {:?}",
        series.partial_sums
    );
    Ok(())
}
