//! Success probability against total time for both controllers on one
//! 2-qubit instance. Near the adiabatic time the feedback curve shows the
//! non-adiabatic oscillations.
//!
//! ```text
//! cargo run --release --example feedback_vs_linear [seed]
//! ```

use fbaqc::cli::log_grid;
use fbaqc::evolution::GridOptions;
use fbaqc::experiments::{sweep_t, ControllerFamily, Instance};

fn main() -> fbaqc::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let instance = Instance::sample(2, seed, &GridOptions::default())?;
    println!(
        "seed {seed}: T_ad = {:.4}, minimum gap = {:.4}, sudden-limit P = {:.4}",
        instance.t_ad, instance.min_gap, instance.initial_overlap
    );

    let ts: Vec<f64> = log_grid(0.1, 10.0, 21).iter().map(|f| f * instance.t_ad).collect();
    let curve = sweep_t(
        &instance,
        &[ControllerFamily::Linear, ControllerFamily::feedback()],
        &ts,
    )?;
    let (lin, fb) = curve.split_at(ts.len());
    println!("{:>10} {:>10} {:>10}", "T/T_ad", "P_linear", "P_feedback");
    for (a, b) in lin.iter().zip(fb) {
        println!("{:>10.4} {:>10.6} {:>10.6}", a.t / instance.t_ad, a.p, b.p);
    }
    Ok(())
}
