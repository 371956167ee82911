//! Check whether an instance's minimum gap sits outside the tank-circuit
//! resonance, for a few resonator settings.
//!
//! ```text
//! cargo run --release --example backaction_window
//! ```

use fbaqc::evolution::{backaction_window_ok, min_gap, BackactionWindow};
use fbaqc::{sample_problem, HamiltonianPair};

fn main() -> fbaqc::Result<()> {
    let pair = HamiltonianPair::from_problem(&sample_problem(2, 5)?)?;
    let delta_min = min_gap(&pair, 128)?.gap;
    println!("minimum gap {delta_min:.4}");
    for (omega_lc, gamma_lc) in [
        (0.1 * delta_min, 0.05 * delta_min),
        (delta_min, 0.2 * delta_min),
        (5.0 * delta_min, delta_min),
    ] {
        let w = BackactionWindow {
            delta_min,
            omega_lc,
            gamma_lc,
        };
        let verdict = if backaction_window_ok(&w) {
            "outside resonance"
        } else {
            "inside resonance"
        };
        println!("omega_LC = {omega_lc:.4}, gamma_LC = {gamma_lc:.4}: {verdict}");
    }
    Ok(())
}
