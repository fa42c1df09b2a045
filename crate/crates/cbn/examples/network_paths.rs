//! Simulate the full catalytic-network SDE system and its frozen
//! reference diffusion, with the state-space monitor.
//!
//! Run with: cargo run --example network_paths

use cbn::coeff::{freeze, CoefficientField};
use cbn::network::BranchingNetwork;
use cbn::sde::{lemma5_monitor, simulate, simulate_a0, SdeSystem, SimConfig};
use cbn::stats::Estimate;

fn main() -> cbn::Result<()> {
    let net = BranchingNetwork::new(3, [(1, 2), (3, 2)])?;
    let field = CoefficientField::constant(3, 1.0, 1.0);
    let x0 = [0.0, 1.0, 0.0];

    // full-truncation Euler for the general system
    let sys = SdeSystem {
        net: net.clone(),
        field: field.clone(),
    };
    let cfg = SimConfig::new(1e-3, 1.0, 5000, 7);
    let ens = simulate(&sys, &x0, &cfg)?;
    for i in 1..=3 {
        let est = Estimate::from_samples(&ens.final_coordinate(i));
        println!("system: E x_{i}(1) = {:.4} +- {:.4}", est.mean, est.stderr);
    }
    let monitor = lemma5_monitor(&ens, 1e-12);
    println!(
        "state-space monitor: {} / {} paths with product below 1e-12, {} exact zeros",
        monitor.below_threshold, monitor.n_paths, monitor.exact_zero
    );

    // the frozen reference diffusion at the degenerate point
    let cls = net.classify_initial(&x0)?;
    let frozen = freeze(&field, &net, &cls)?;
    println!("frozen constants: b0 = {:?}, gamma0 = {:?}", frozen.b0, frozen.gamma0);
    let ens0 = simulate_a0(&cls, &frozen, &x0, &cfg)?;
    for i in 1..=3 {
        let est = Estimate::from_samples(&ens0.final_coordinate(i));
        println!("reference: E x_{i}(1) = {:.4} +- {:.4}", est.mean, est.stderr);
    }
    Ok(())
}
