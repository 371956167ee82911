//! Ground-state curvature along the sweep for a random 3-qubit instance,
//! from the level dynamics, with the gap alongside.
//!
//! ```text
//! cargo run --release --example curvature_profile [seed]
//! ```

use fbaqc::evolution::min_gap;
use fbaqc::hamiltonians::diagonalize_at;
use fbaqc::spectral::curvature_profile;
use fbaqc::{sample_problem, HamiltonianPair};

fn main() -> fbaqc::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let pair = HamiltonianPair::from_problem(&sample_problem(3, seed)?)?;
    let profile = curvature_profile(&pair, 41)?;

    println!("{:>6} {:>12} {:>14} {:>14}", "lambda", "gap", "c2_full", "c2_pair");
    for s in &profile.samples {
        let gap = diagonalize_at(&pair, s.lambda)?.ground_gap();
        println!(
            "{:>6.3} {:>12.5} {:>14.6} {:>14.6}",
            s.lambda, gap, s.c2_full, s.c2_pair
        );
    }
    let g = min_gap(&pair, 256)?;
    println!(
        "minimum gap {:.5} at lambda {:.4}; peak |c2| {:.4}",
        g.gap,
        g.lambda,
        profile.max_abs()
    );
    Ok(())
}
