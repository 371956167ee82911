//! Relative gain of feedback over linear interpolation at equal total time,
//! swept over the controller gain.
//!
//! ```text
//! cargo run --release --example delta_p [samples]
//! ```

use fbaqc::cli::log_grid;
use fbaqc::experiments::{delta_p_sweep, DeltaPSpec};

fn main() -> fbaqc::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let summary = delta_p_sweep(&DeltaPSpec::new(log_grid(0.01, 10.0, 13), 2, samples, 0))?;
    let best = summary
        .rows
        .iter()
        .max_by(|a, b| a.mean_dp.total_cmp(&b.mean_dp))
        .expect("non-empty grid");
    println!("{:>10} {:>10} {:>10}", "k", "<dP>", "std");
    for row in &summary.rows {
        let mark = if row.k == best.k { "  <- best" } else { "" };
        println!("{:>10.4} {:>10.5} {:>10.5}{mark}", row.k, row.mean_dp, row.std_dp);
    }
    Ok(())
}
