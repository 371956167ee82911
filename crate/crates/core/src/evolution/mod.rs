//! Wavefunction evolution through the annealing sweep under a pace
//! controller, plus the scalar diagnostics of an instance (minimum gap,
//! adiabatic time, back-action window).
//!
//! `λ` runs from 1 to 0. A controller supplies the pace `s = |dt/dλ|`; time
//! accumulates as `T = ∫₀¹ s dλ`.
//!
//! The stepper works in the instantaneous eigenbasis `ψ = V(λ)·a`. Over one
//! step the dynamical phases are applied exactly and the frame rotation
//! `⟨ℓ|∂_λ m⟩` enters through a unitary factor whose entries carry the
//! `sinc` of the phase accumulated across the step. Every factor is exactly
//! unitary, and in the adiabatic limit the inter-level transfer vanishes
//! instead of aliasing.

mod analysis;
mod grid;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianPair;
use crate::spectral::CurvatureProfile;

pub use analysis::{adiabatic_time, backaction_window_ok, golden_section_min, min_gap, BackactionWindow, MinGap};
pub use grid::{GridOptions, GridPoint, SpectralGrid};

/// Normalized state vector at a point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub amplitudes: DVector<Complex64>,
    /// `None` before the state is attached to a point of the sweep.
    pub lambda: Option<f64>,
    pub t_elapsed: f64,
}

impl WaveState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Computational-basis state `|index⟩` at `λ`.
    pub fn basis(dim: usize, index: usize, lambda: Option<f64>) -> Self {
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = Complex64::new(1.0, 0.0);
        WaveState {
            amplitudes,
            lambda,
            t_elapsed: 0.0,
        }
    }
}

/// `|⟨0_p|ψ⟩|²` for a state at the end of the sweep.
pub fn success_probability(psi: &WaveState, pair: &HamiltonianPair) -> Result<f64> {
    if psi.lambda != Some(0.0) {
        return Err(Error::InvalidState(format!(
            "success probability needs a state at lambda = 0, got {:?}",
            psi.lambda
        )));
    }
    if psi.amplitudes.len() != pair.dim() {
        return Err(Error::InvalidState("state dimension does not match the pair".into()));
    }
    Ok(psi.amplitudes[pair.problem_ground_index()?].norm_sqr())
}

/// Lower clamp on `|d²E₀/dλ²|` for the feedback pace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CurvatureFloor {
    Absolute(f64),
    /// Fraction of the largest `|c2|` over the curvature source.
    RelativeToPeak(f64),
}

impl Default for CurvatureFloor {
    fn default() -> Self {
        CurvatureFloor::RelativeToPeak(1e-6)
    }
}

/// Where a feedback controller reads the curvature from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CurvatureSource {
    /// Level dynamics integrated alongside the wavefunction.
    #[default]
    Live,
    /// A precomputed profile, linearly interpolated.
    Replay(Arc<CurvatureProfile>),
}

/// Schedule policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PaceController {
    /// Constant `dλ/dt = -1/T`.
    Linear { total_time: f64 },
    /// `|dt/dλ| = k·max(|d²E₀/dλ²|, floor)`.
    Feedback {
        gain: f64,
        floor: CurvatureFloor,
        source: CurvatureSource,
    },
}

impl PaceController {
    pub fn linear(total_time: f64) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        Ok(PaceController::Linear { total_time })
    }

    pub fn feedback(gain: f64) -> Result<Self> {
        Self::feedback_with(gain, CurvatureFloor::default(), CurvatureSource::Live)
    }

    pub fn feedback_with(gain: f64, floor: CurvatureFloor, source: CurvatureSource) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("gain must be positive, got {gain}")));
        }
        let floor_value = match floor {
            CurvatureFloor::Absolute(v) | CurvatureFloor::RelativeToPeak(v) => v,
        };
        if !(floor_value > 0.0 && floor_value.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "curvature floor must be positive, got {floor_value}"
            )));
        }
        Ok(PaceController::Feedback { gain, floor, source })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PaceController::Linear { .. } => "linear",
            PaceController::Feedback { .. } => "feedback",
        }
    }

    /// `|dt/dλ|` given the current signed curvature. A relative floor must be
    /// resolved to an absolute one first.
    pub fn pace(&self, c2: f64) -> Result<f64> {
        let s = match *self {
            PaceController::Linear { total_time } => total_time,
            PaceController::Feedback {
                gain,
                floor: CurvatureFloor::Absolute(floor),
                ..
            } => gain * c2.abs().max(floor),
            PaceController::Feedback { .. } => {
                return Err(Error::InvalidState(
                    "relative curvature floor has not been resolved".into(),
                ))
            }
        };
        if s.is_nan() || s <= 0.0 {
            return Err(Error::InvalidState(format!("nonpositive pace {s}")));
        }
        Ok(s)
    }
}

/// Free function form of [`PaceController::pace`].
pub fn pace(controller: &PaceController, c2: f64) -> Result<f64> {
    controller.pace(c2)
}

/// One row of the optional trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub lambda: f64,
    pub t: f64,
    /// Population of the instantaneous ground state.
    pub p_instantaneous: f64,
    pub gap: f64,
    pub abs_curvature: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolveOptions {
    pub grid: GridOptions,
    /// Record every `stride`-th grid node; `None` disables the dump.
    pub sample_stride: Option<usize>,
}

/// Result of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    pub seed: Option<u64>,
    /// Controller with any relative floor resolved to an absolute value.
    pub controller: PaceController,
    /// Success probability.
    pub p: f64,
    /// Total computation time.
    pub t: f64,
    pub final_state: WaveState,
    /// Largest `|‖ψ‖ - 1|` seen after any step.
    pub norm_drift: f64,
    pub steps: usize,
    /// The live curvature came from diagonalization because the level
    /// dynamics hit a near-degeneracy.
    pub curvature_fallback: bool,
    pub samples: Option<Vec<TrajectoryRow>>,
}

/// Evolve `|0(λ=1)⟩` from `λ = 1` to 0 under `controller`.
pub fn evolve(pair: &HamiltonianPair, controller: &PaceController, options: &EvolveOptions) -> Result<RunRecord> {
    let grid = SpectralGrid::build(pair, &options.grid)?;
    evolve_on_grid(&grid, controller, options.sample_stride)
}

/// Curvature values the controller sees at every grid sample point, and
/// whether they came from the diagonalization fallback.
pub fn controller_curvature(grid: &SpectralGrid, source: &CurvatureSource) -> (Vec<f64>, bool) {
    match source {
        CurvatureSource::Live => match grid.live_curvature() {
            Some(c) => (c.to_vec(), false),
            None => (grid.exact_curvature(), true),
        },
        CurvatureSource::Replay(profile) => (grid.sample_lambdas().iter().map(|&l| profile.c2_at(l)).collect(), false),
    }
}

/// Replace a relative floor by its absolute value for this grid.
pub fn resolve_controller(grid: &SpectralGrid, controller: &PaceController) -> PaceController {
    match controller {
        PaceController::Feedback {
            gain,
            floor: CurvatureFloor::RelativeToPeak(frac),
            source,
        } => {
            let (c2, _) = controller_curvature(grid, source);
            let peak = c2.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let floor = (frac * peak).max(f64::MIN_POSITIVE);
            PaceController::Feedback {
                gain: *gain,
                floor: CurvatureFloor::Absolute(floor),
                source: source.clone(),
            }
        }
        other => other.clone(),
    }
}

/// `∫₀¹ max(|c2|, floor) dλ` on the grid, so that gain `k` yields total time
/// `k` times this value.
pub fn feedback_time_per_gain(grid: &SpectralGrid, floor: CurvatureFloor, source: &CurvatureSource) -> Result<f64> {
    let unit = PaceController::feedback_with(1.0, floor, source.clone())?;
    let unit = resolve_controller(grid, &unit);
    let (c2, _) = controller_curvature(grid, source);
    let paces = c2.iter().map(|&c| unit.pace(c)).collect::<Result<Vec<_>>>()?;
    Ok(simpson_total(grid, &paces))
}

fn simpson_total(grid: &SpectralGrid, paces: &[f64]) -> f64 {
    grid.nodes
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let h = w[0].lambda - w[1].lambda;
            h / 6.0 * (paces[2 * k] + 4.0 * paces[2 * k + 1] + paces[2 * k + 2])
        })
        .sum()
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Run the sweep on a precomputed grid.
pub fn evolve_on_grid(
    grid: &SpectralGrid,
    controller: &PaceController,
    sample_stride: Option<usize>,
) -> Result<RunRecord> {
    let pair = grid.pair();
    let ground = pair.problem_ground_index()?;
    let controller = resolve_controller(grid, controller);
    let (c2, fallback) = match &controller {
        PaceController::Linear { .. } => (grid.exact_curvature(), false),
        PaceController::Feedback { source, .. } => controller_curvature(grid, source),
    };
    let paces = c2.iter().map(|&c| controller.pace(c)).collect::<Result<Vec<_>>>()?;

    let d = grid.dim();
    let stride = sample_stride.map(|s| s.max(1));
    let mut samples = stride.map(|_| Vec::new());
    let mut amps: DVector<Complex64> = DVector::zeros(d);
    amps[0] = Complex64::new(1.0, 0.0);
    let mut t = 0.0;
    let mut norm_drift = 0.0f64;

    let record =
        |samples: &mut Option<Vec<TrajectoryRow>>, node: &GridPoint, t: f64, amps: &DVector<Complex64>, c2: f64| {
            if let Some(rows) = samples.as_mut() {
                rows.push(TrajectoryRow {
                    lambda: node.lambda,
                    t,
                    p_instantaneous: amps[0].norm_sqr(),
                    gap: node.gap(),
                    abs_curvature: c2.abs(),
                });
            }
        };
    record(&mut samples, &grid.nodes[0], t, &amps, c2[0]);

    let mut omega = DMatrix::<f64>::zeros(d, d);
    let mut lhs = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DMatrix::<f64>::zeros(d, 2);
    let mut phase1 = vec![0.0; d];
    let mut phase2 = vec![0.0; d];
    for (k, step) in grid.steps.iter().enumerate() {
        let (start, end) = (&grid.nodes[k], &grid.nodes[k + 1]);
        let (s0, sm, s1) = (paces[2 * k], paces[2 * k + 1], paces[2 * k + 2]);
        let h = start.lambda - end.lambda;
        let dt = h / 6.0 * (s0 + 4.0 * sm + s1);
        for l in 0..d {
            let (e0, em, e1) = (start.energies[l], step.mid.energies[l], end.energies[l]);
            phase1[l] = 0.25 * h * (s0 * e0 + sm * em);
            phase2[l] = 0.25 * h * (sm * em + s1 * e1);
        }
        // first half of the dynamical phase
        for l in 0..d {
            amps[l] *= Complex64::from_polar(1.0, -phase1[l]);
        }
        // frame rotation with phase-filtered coupling, Ω = -δ·(G ∘ sinc), δ = -h
        let mut idx = 0;
        for l in 0..d {
            omega[(l, l)] = 0.0;
            for m in l + 1..d {
                let w = sm * (step.mid.energies[l] - step.mid.energies[m]);
                let v = h * step.frame_rate[idx] * sinc(0.5 * w * h);
                omega[(l, m)] = v;
                omega[(m, l)] = -v;
                idx += 1;
            }
        }
        // Cayley transform (I - Ω/2)⁻¹(I + Ω/2), exactly orthogonal
        for l in 0..d {
            for m in 0..d {
                lhs[(l, m)] = -0.5 * omega[(l, m)];
            }
            lhs[(l, l)] += 1.0;
        }
        for l in 0..d {
            let mut re = amps[l].re;
            let mut im = amps[l].im;
            for m in 0..d {
                re += 0.5 * omega[(l, m)] * amps[m].re;
                im += 0.5 * omega[(l, m)] * amps[m].im;
            }
            rhs[(l, 0)] = re;
            rhs[(l, 1)] = im;
        }
        let lu = lhs.clone().lu();
        if !lu.solve_mut(&mut rhs) {
            return Err(Error::IntegrationFailure(format!(
                "singular frame rotation at lambda = {}",
                step.mid.lambda
            )));
        }
        for l in 0..d {
            amps[l] = Complex64::new(rhs[(l, 0)], rhs[(l, 1)]) * Complex64::from_polar(1.0, -phase2[l]);
        }
        t += dt;
        norm_drift = norm_drift.max((amps.norm() - 1.0).abs());
        if let Some(s) = stride {
            if (k + 1) % s == 0 || k + 1 == grid.steps.len() {
                record(&mut samples, end, t, &amps, c2[2 * k + 2]);
            }
        }
    }

    let v = grid.final_states().map(|x| Complex64::new(x, 0.0));
    let psi = WaveState {
        amplitudes: v * &amps,
        lambda: Some(0.0),
        t_elapsed: t,
    };
    let p = psi.amplitudes[ground].norm_sqr();
    Ok(RunRecord {
        n: pair.n(),
        seed: pair.seed(),
        controller,
        p,
        t,
        final_state: psi,
        norm_drift,
        steps: grid.step_count(),
        curvature_fallback: fallback,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{bias_ground_state, sample_problem, BiasSpec, ProblemSpec};

    #[test]
    fn pace_examples() {
        assert_eq!(PaceController::linear(10.0).unwrap().pace(-123.0).unwrap(), 10.0);
        let fb = PaceController::feedback_with(2.0, CurvatureFloor::Absolute(1e-3), CurvatureSource::Live).unwrap();
        assert_eq!(fb.pace(-3.0).unwrap(), 6.0);
        assert_eq!(fb.pace(0.0).unwrap(), 2e-3);
        assert!(PaceController::feedback(2.0).unwrap().pace(-1.0).is_err());
    }

    #[test]
    fn controller_validation() {
        assert!(PaceController::linear(0.0).is_err());
        assert!(PaceController::feedback(-1.0).is_err());
        assert!(PaceController::feedback_with(1.0, CurvatureFloor::Absolute(0.0), CurvatureSource::Live).is_err());
    }

    #[test]
    fn success_probability_cases() {
        let pair = HamiltonianPair::from_problem(&sample_problem(2, 12).unwrap()).unwrap();
        let idx = pair.problem_ground_index().unwrap();
        assert_eq!(
            success_probability(&WaveState::basis(4, idx, Some(0.0)), &pair).unwrap(),
            1.0
        );
        assert_eq!(
            success_probability(&WaveState::basis(4, (idx + 1) % 4, Some(0.0)), &pair).unwrap(),
            0.0
        );
        let mut uniform = bias_ground_state(2).unwrap();
        assert!(success_probability(&uniform, &pair).is_err());
        uniform.lambda = Some(0.0);
        assert!((success_probability(&uniform, &pair).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_level_adiabatic_limit() {
        let pair =
            HamiltonianPair::with_bias(&ProblemSpec::explicit(1, vec![0.8]).unwrap(), BiasSpec::standard(1)).unwrap();
        let t_ad = adiabatic_time(&pair, 64).unwrap();
        let run = evolve(
            &pair,
            &PaceController::linear(1e4 * t_ad).unwrap(),
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(run.p >= 0.999, "P = {}", run.p);
        assert!(run.norm_drift < 1e-12);
        assert!((run.t - 1e4 * t_ad).abs() <= 1e-9 * run.t);
        assert_eq!(run.final_state.t_elapsed, run.t);
    }

    #[test]
    fn trajectory_dump_is_sampled() {
        let pair = HamiltonianPair::from_problem(&sample_problem(2, 2).unwrap()).unwrap();
        let opts = EvolveOptions {
            sample_stride: Some(50),
            ..EvolveOptions::default()
        };
        let run = evolve(&pair, &PaceController::feedback(1.0).unwrap(), &opts).unwrap();
        let rows = run.samples.unwrap();
        assert_eq!(rows[0].lambda, 1.0);
        assert_eq!(rows.last().unwrap().lambda, 0.0);
        assert!((rows.last().unwrap().t - run.t).abs() <= 1e-12 * run.t);
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t && w[1].lambda < w[0].lambda));
        assert!((rows[0].p_instantaneous - 1.0).abs() < 1e-15);
    }
}
