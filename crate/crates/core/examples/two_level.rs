//! Single-qubit sweep: compare the analytic gap and curvature with the
//! numerical ones, then anneal at a few total times.
//!
//! ```text
//! cargo run --release --example two_level
//! ```

use fbaqc::evolution::{adiabatic_time, min_gap};
use fbaqc::hamiltonians::{diagonalize_at, BiasSpec};
use fbaqc::spectral::curvature_from_eigensystem;
use fbaqc::{evolve, EvolveOptions, HamiltonianPair, PaceController, ProblemSpec};

fn main() -> fbaqc::Result<()> {
    let eps = 0.6;
    let pair = HamiltonianPair::with_bias(&ProblemSpec::explicit(1, vec![eps])?, BiasSpec::standard(1))?;
    let z = pair.z();

    let gap = min_gap(&pair, 64)?;
    println!(
        "minimum gap {:.6} at lambda {:.2e} (analytic {:.6} at 0)",
        gap.gap,
        gap.lambda,
        2.0 * eps
    );

    println!("{:>6} {:>14} {:>14}", "lambda", "c2", "closed form");
    for lambda in [1.0, 0.5, 0.2, 0.1, 0.0] {
        let c2 = curvature_from_eigensystem(&pair, &diagonalize_at(&pair, lambda)?)?.c2_full;
        let exact = -eps * eps * z * z / (eps * eps + lambda * lambda * z * z).powf(1.5);
        println!("{lambda:>6.2} {c2:>14.8} {exact:>14.8}");
    }

    let t_ad = adiabatic_time(&pair, 64)?;
    println!("T_ad = {t_ad:.5}");
    for factor in [1e-3, 0.1, 1.0, 10.0, 100.0] {
        let run = evolve(
            &pair,
            &PaceController::linear(factor * t_ad)?,
            &EvolveOptions::default(),
        )?;
        println!("linear T = {:>10.4}: P = {:.6}", run.t, run.p);
    }
    Ok(())
}
