mod common;

use std::sync::Arc;

use fbaqc::evolution::{
    adiabatic_time, evolve_on_grid, min_gap, CurvatureFloor, CurvatureSource, EvolveOptions, GridOptions,
    PaceController, SpectralGrid,
};
use fbaqc::experiments::Instance;
use fbaqc::hamiltonians::diagonalize_at;
use fbaqc::spectral::{curvature_from_eigensystem, curvature_profile};
use fbaqc::{evolve, HamiltonianPair};
use proptest::prelude::*;

fn exact_c2(pair: &HamiltonianPair, lambda: f64) -> f64 {
    curvature_from_eigensystem(pair, &diagonalize_at(pair, lambda).unwrap())
        .unwrap()
        .c2_full
}

fn absolute_floor(controller: &PaceController) -> f64 {
    match controller {
        PaceController::Feedback {
            floor: CurvatureFloor::Absolute(f),
            ..
        } => *f,
        other => panic!("unresolved controller {other:?}"),
    }
}

#[test]
fn shifting_the_problem_energy_leaves_p_unchanged() {
    for seed in 0..5 {
        let pair = common::random_pair(2, seed);
        let shifted = pair.shifted(3.7);
        let t_ad = adiabatic_time(&pair, 64).unwrap();
        for controller in [
            PaceController::linear(t_ad).unwrap(),
            PaceController::feedback(0.2).unwrap(),
        ] {
            let a = evolve(&pair, &controller, &EvolveOptions::default()).unwrap();
            let b = evolve(&shifted, &controller, &EvolveOptions::default()).unwrap();
            assert!((a.p - b.p).abs() <= 1e-9, "seed {seed}: {} vs {}", a.p, b.p);
        }
    }
}

#[test]
fn sudden_limit_recovers_initial_overlap() {
    for seed in 0..10 {
        let instance = Instance::sample(2, seed, &GridOptions::default()).unwrap();
        let run = instance
            .run(&PaceController::linear(1e-4 * instance.t_ad).unwrap())
            .unwrap();
        assert!(
            (run.p - instance.initial_overlap).abs() <= 0.02,
            "seed {seed}: P = {} overlap = {}",
            run.p,
            instance.initial_overlap
        );
    }
}

#[test]
fn feedback_time_matches_quadrature() {
    for seed in 0..5 {
        let pair = common::random_pair(3, seed);
        let k = 0.3;
        let run = evolve(&pair, &PaceController::feedback(k).unwrap(), &EvolveOptions::default()).unwrap();
        let floor = absolute_floor(&run.controller);
        let peak = min_gap(&pair, 64).unwrap().lambda;
        let f = |l: f64| exact_c2(&pair, l).abs().max(floor);
        let quad = k * (common::integrate(f, 0.0, peak, 1e-11) + common::integrate(f, peak, 1.0, 1e-11));
        assert!((run.t - quad).abs() <= 1e-6 * quad, "seed {seed}: {} vs {quad}", run.t);
    }
}

#[test]
fn norm_is_conserved_for_both_controllers() {
    for seed in 0..5 {
        for n in [2, 4] {
            let instance = Instance::sample(n, seed, &GridOptions::default()).unwrap();
            for t in [0.1, 1.0, 30.0] {
                let lin = instance
                    .run(&PaceController::linear(t * instance.t_ad).unwrap())
                    .unwrap();
                let fb = instance
                    .run_for_time(&fbaqc::experiments::ControllerFamily::feedback(), t * instance.t_ad)
                    .unwrap();
                assert!(lin.norm_drift <= 1e-9 && fb.norm_drift <= 1e-9);
                assert!((lin.final_state.norm() - 1.0).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn stepper_converges_at_second_order() {
    let pair = common::random_pair(2, 4);
    let t_ad = adiabatic_time(&pair, 64).unwrap();
    let controller = PaceController::linear(2.0 * t_ad).unwrap();
    let p_at = |scale: f64| {
        let grid = GridOptions {
            max_rotation: 0.04 * scale,
            max_step: 8e-3 * scale,
            ..GridOptions::default()
        };
        evolve_on_grid(&SpectralGrid::build(&pair, &grid).unwrap(), &controller, None)
            .unwrap()
            .p
    };
    let p: Vec<f64> = [1.0, 0.5, 0.25, 0.125].iter().map(|&s| p_at(s)).collect();
    let d1 = (p[0] - p[1]).abs();
    let d2 = (p[1] - p[2]).abs();
    let d3 = (p[2] - p[3]).abs();
    assert!(d1 / d2 > 2.8 && d2 / d3 > 2.8, "differences {d1:e} {d2:e} {d3:e}");
}

#[test]
fn linear_success_eventually_rises_to_one() {
    for seed in 0..5 {
        let instance = Instance::sample(2, seed, &GridOptions::default()).unwrap();
        let ps: Vec<f64> = (0..12)
            .map(|j| {
                let t = instance.t_ad * 2f64.powi(j);
                instance.run(&PaceController::linear(t).unwrap()).unwrap().p
            })
            .collect();
        let tail = &ps[6..];
        assert!(tail.windows(2).all(|w| w[1] >= w[0] - 1e-6), "seed {seed}: {ps:?}");
        assert!(*ps.last().unwrap() > 0.999, "seed {seed}: {ps:?}");
    }
}

#[test]
fn reported_time_equals_elapsed_time() {
    let pair = common::random_pair(3, 9);
    for controller in [
        PaceController::linear(5.0).unwrap(),
        PaceController::feedback(1.5).unwrap(),
    ] {
        let run = evolve(&pair, &controller, &EvolveOptions::default()).unwrap();
        assert!((run.t - run.final_state.t_elapsed).abs() <= 1e-9 * run.t);
        assert_eq!(run.final_state.lambda, Some(0.0));
    }
    let run = evolve(&pair, &PaceController::linear(5.0).unwrap(), &EvolveOptions::default()).unwrap();
    assert!((run.t - 5.0).abs() <= 1e-12 * 5.0);
}

#[test]
fn replayed_profile_reproduces_live_feedback() {
    for seed in [1, 7, 20] {
        let pair = common::random_pair(2, seed);
        let grid = SpectralGrid::build(&pair, &GridOptions::default()).unwrap();
        let profile = Arc::new(curvature_profile(&pair, 1024).unwrap());
        for k in [0.05, 0.5] {
            let live = evolve_on_grid(&grid, &PaceController::feedback(k).unwrap(), None).unwrap();
            let replay =
                PaceController::feedback_with(k, CurvatureFloor::default(), CurvatureSource::Replay(profile.clone()))
                    .unwrap();
            let replay = evolve_on_grid(&grid, &replay, None).unwrap();
            assert!(
                (live.p - replay.p).abs() <= 1e-4,
                "seed {seed} k {k}: {} vs {}",
                live.p,
                replay.p
            );
        }
    }
}

#[test]
fn two_level_gap_and_adiabatic_time_are_analytic() {
    let z = 10f64.sqrt();
    for eps in [-1.3, 0.4, 2.0] {
        let pair = common::two_level(eps, z);
        let g = min_gap(&pair, 64).unwrap();
        assert!((g.gap - 2.0 * eps.abs()).abs() < 1e-12 && g.lambda < 1e-9);
        // ⟨1|H_b|0⟩ = Z·|ε|/√(ε²+λ²Z²), largest at λ = 0
        let expected = z / (4.0 * eps * eps);
        let t_ad = adiabatic_time(&pair, 64).unwrap();
        assert!((t_ad - expected).abs() <= 1e-9 * expected, "{t_ad} vs {expected}");
    }
}

#[test]
fn adiabatic_time_scales_inversely() {
    let pair = common::random_pair(3, 2);
    let base = adiabatic_time(&pair, 64).unwrap();
    let scaled = adiabatic_time(&pair.scaled(4.0).unwrap(), 64).unwrap();
    assert!((scaled * 4.0 - base).abs() <= 1e-8 * base);
}

#[test]
fn minimum_gap_is_positive_across_the_ensemble() {
    for n in 2..=4 {
        for seed in 0..20 {
            assert!(min_gap(&common::random_pair(n, seed), 64).unwrap().gap > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_stay_normalized_and_bounded(seed in 0u64..10_000, log_t in -2.0f64..2.0, feedback in any::<bool>()) {
        let pair = common::random_pair(2, seed);
        let controller = if feedback {
            PaceController::feedback(10f64.powf(log_t)).unwrap()
        } else {
            PaceController::linear(10f64.powf(log_t)).unwrap()
        };
        let run = evolve(&pair, &controller, &EvolveOptions::default()).unwrap();
        prop_assert!(run.norm_drift <= 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&run.p));
        prop_assert!((run.t - run.final_state.t_elapsed).abs() <= 1e-9 * run.t);
    }

    #[test]
    fn feedback_time_is_linear_in_gain(seed in 0u64..10_000, k in 0.01f64..10.0) {
        let pair = common::random_pair(2, seed);
        let grid = SpectralGrid::build(&pair, &GridOptions::default()).unwrap();
        let a = evolve_on_grid(&grid, &PaceController::feedback(k).unwrap(), None).unwrap();
        let b = evolve_on_grid(&grid, &PaceController::feedback(2.0 * k).unwrap(), None).unwrap();
        prop_assert!((b.t - 2.0 * a.t).abs() <= 1e-12 * b.t);
    }

    #[test]
    fn backaction_predicate_is_the_complement_of_the_closed_window(
        d in 0.0f64..10.0, w in 0.0f64..10.0, g in 0.0f64..5.0
    ) {
        let ok = fbaqc::evolution::backaction_window_ok(&fbaqc::evolution::BackactionWindow {
            delta_min: d, omega_lc: w, gamma_lc: g,
        });
        prop_assert_eq!(ok, !(w - g..=w + g).contains(&d));
    }
}
