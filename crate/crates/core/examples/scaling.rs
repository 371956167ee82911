//! Time needed to reach P = 0.9 as a function of qubit count, with
//! power-law fits per controller. Means are reported as in the scaling
//! table, medians alongside because the ensemble is heavy-tailed.
//!
//! ```text
//! cargo run --release --example scaling [samples]
//! ```

use fbaqc::evolution::GridOptions;
use fbaqc::experiments::{
    fit_power_law, scaling_study, time_to_target, ControllerFamily, EnsembleSpec, Instance, TargetSearch,
};
use fbaqc::hamiltonians::derive_seed;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

fn main() -> fbaqc::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let spec = EnsembleSpec::new(vec![2, 3, 4, 5], samples, 1);
    let summary = scaling_study(&spec)?;
    for cell in &summary.cells {
        println!(
            "n = {} {:>8}: mean T = {:>10.4} std = {:>10.4} ({} of {})",
            cell.n, cell.controller, cell.mean_t, cell.std_t, cell.count, samples
        );
    }
    for fit in &summary.fits {
        println!("{:>8}: T ~ n^{:.3}", fit.controller, fit.fit.exponent);
    }

    println!("medians:");
    for family in [ControllerFamily::Linear, ControllerFamily::feedback()] {
        let mut points = Vec::new();
        for &n in &spec.n_values {
            let times: Vec<f64> = (0..samples as u64)
                .filter_map(|i| {
                    let instance = Instance::sample(n, derive_seed(1, i), &GridOptions::default()).ok()?;
                    time_to_target(&instance, &family, 0.9, &TargetSearch::default())
                        .ok()
                        .map(|h| h.t)
                })
                .collect();
            let m = median(times);
            println!("  n = {n} {:>8}: median T = {m:.4}", family.name());
            points.push((n as f64, m));
        }
        println!(
            "  {:>8}: median T ~ n^{:.3}",
            family.name(),
            fit_power_law(&points)?.exponent
        );
    }
    Ok(())
}
