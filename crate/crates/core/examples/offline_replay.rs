//! Offline control: write a curvature profile, read it back and drive a
//! feedback run from it, then compare with the live controller.
//!
//! ```text
//! cargo run --release --example offline_replay
//! ```

use std::sync::Arc;

use fbaqc::evolution::{evolve_on_grid, CurvatureFloor, CurvatureSource, GridOptions, SpectralGrid};
use fbaqc::io::{profile_csv, replay_profile, write_atomic};
use fbaqc::spectral::curvature_profile;
use fbaqc::{sample_problem, HamiltonianPair, PaceController};

fn main() -> fbaqc::Result<()> {
    let pair = HamiltonianPair::from_problem(&sample_problem(2, 21)?)?;
    let dir = std::env::temp_dir().join("fbaqc-offline-replay");
    std::fs::create_dir_all(&dir).map_err(|e| fbaqc::Error::InvalidState(e.to_string()))?;
    let path = dir.join("profile.csv");

    let grid = SpectralGrid::build(&pair, &GridOptions::default())?;
    let live = evolve_on_grid(&grid, &PaceController::feedback(0.2)?, None)?;
    println!("live:   P = {:.8} T = {:.6}", live.p, live.t);
    for resolution in [17, 65, 513, 2049] {
        write_atomic(&path, &profile_csv(&curvature_profile(&pair, resolution)?))?;
        let profile = Arc::new(replay_profile(&path)?);
        let controller =
            PaceController::feedback_with(0.2, CurvatureFloor::default(), CurvatureSource::Replay(profile))?;
        let run = evolve_on_grid(&grid, &controller, None)?;
        println!(
            "replay ({resolution:>4} rows): P = {:.8} T = {:.6} |dP| = {:.1e}",
            run.p,
            run.t,
            (run.p - live.p).abs()
        );
    }
    Ok(())
}
