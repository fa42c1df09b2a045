//! Weighted Hoelder seminorms, the semigroup norm, and their ratio for a
//! few test functions at a degenerate point.
//!
//! Run with: cargo run --example weighted_norms

use cbn::norms::{norm_report, weighted_seminorm};
use cbn::semigroup::McConfig;
use cbn::verify::{default_grid, standard_family, two_catalyst_fixture};

fn main() -> cbn::Result<()> {
    let (_, cls, frozen, _) = two_catalyst_fixture();
    let alpha = 0.5;
    let grid = default_grid(&cls, alpha)?;

    // seminorm of a hand-picked Lipschitz function
    let f = |x: &[f64]| x[0].min(1.0);
    let sem = weighted_seminorm(&f, &cls, &grid);
    println!("weighted seminorm of min(x_1, 1):");
    for (i, v) in &sem.per_coord {
        println!("  coordinate {i}: {v:.4}");
    }
    println!("  weak norm: {:.4}", sem.weak_norm());

    // both norms for a small family of smooth test functions
    let t_grid = [0.25, 0.5, 1.0];
    let x_grid = vec![vec![0.0, 1.0, 0.0], vec![0.1, 1.0, 0.1]];
    let mc = McConfig::new(2000, 3);
    println!("function   weak      semigroup  ratio");
    for (k, f) in standard_family(3, 2, 4).iter().enumerate() {
        let rep = norm_report(f, &frozen, &cls, &grid, &t_grid, &x_grid, &mc)?;
        println!(
            "{k:<10} {:<9.4} {:<10.4} {:.3}",
            rep.weak_norm, rep.semigroup.value, rep.ratio
        );
    }
    Ok(())
}
