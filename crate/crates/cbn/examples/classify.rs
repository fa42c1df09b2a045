//! Classify initial points of branching networks into their degeneracy
//! structure (N_R / N_C / N_2) and check state-space membership.
//!
//! Run with: cargo run --example classify

use cbn::network::BranchingNetwork;

fn main() -> cbn::Result<()> {
    // two catalysts feeding one reactant: 1 -> 2 <- 3
    let net = BranchingNetwork::new(3, [(1, 2), (3, 2)])?;
    println!("two-catalyst network, edges {:?}", net.edges());
    for x0 in [
        vec![0.0, 1.0, 0.0], // fully degenerate: both catalysts vanish
        vec![0.0, 1.0, 1.0], // one catalyst alive: nothing degenerate
        vec![0.0, 0.0, 0.0], // outside the state space
    ] {
        let cls = net.classify_initial(&x0)?;
        println!(
            "  x0 = {:?}: N_R = {:?}, N_C = {:?}, N_2 = {:?}, in S: {}",
            x0, cls.n_r, cls.n_c, cls.n_2, cls.in_s
        );
    }

    // hypercycle: every vertex catalyses the next
    let net = BranchingNetwork::new(4, [(1, 2), (2, 3), (3, 4), (4, 1)])?;
    let cls = net.classify_initial(&[1.0, 0.0, 1.0, 0.0])?;
    println!("hypercycle at (1,0,1,0): N_R = {:?}, N_C = {:?}", cls.n_r, cls.n_c);
    let cls = net.classify_initial(&[0.0, 1.0, 0.0, 0.0])?;
    println!(
        "hypercycle at (0,1,0,0): N_R = {:?}, N_C = {:?}, in S: {}",
        cls.n_r, cls.n_c, cls.in_s
    );
    Ok(())
}
