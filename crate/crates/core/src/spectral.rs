//! Pechukas–Yukawa level dynamics and the ground-state curvature signal.
//!
//! The levels `E_ℓ(λ)` behave like particles with velocities
//! `v_ℓ = ⟨ℓ|H_b|ℓ⟩` and pairwise couplings `l_ℓj = (E_ℓ - E_j)⟨ℓ|H_b|j⟩`.
//! `H(λ)` is real symmetric here, so with real eigenvectors every coupling is
//! real and the coupling matrix is antisymmetric.
//!
//! Integration runs in decreasing `λ`, starting from the exact spectrum at
//! `λ = 1`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonians::{diagonalize_at, EigenSystem, HamiltonianPair};
use crate::ode::{self, StepControl};

/// Relative level separation (w.r.t. `‖H(1)‖`) below which the flow is
/// treated as singular.
pub const COLLISION_FLOOR: f64 = 1e-12;

/// A point of the Pechukas–Yukawa phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumState {
    pub lambda: f64,
    pub energies: DVector<f64>,
    pub velocities: DVector<f64>,
    /// `couplings[(ℓ, j)] = l_ℓj`, antisymmetric with a zero diagonal.
    pub couplings: DMatrix<f64>,
}

/// `∂/∂λ` of every component of a [`SpectrumState`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDerivative {
    pub energies: DVector<f64>,
    pub velocities: DVector<f64>,
    pub couplings: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub lambda: f64,
    /// Two-level curvature, keeping only the first excited level.
    pub c2_pair: f64,
    /// Exact `d²E₀/dλ²`, summed over all excited levels.
    pub c2_full: f64,
}

impl SpectrumState {
    /// Phase-space point from an exact eigendecomposition of `H(λ)`.
    pub fn from_eigensystem(pair: &HamiltonianPair, eig: &EigenSystem) -> Self {
        let m = pair.bias().in_basis(&eig.states);
        let d = eig.dim();
        let e = &eig.energies;
        SpectrumState {
            lambda: eig.lambda.unwrap_or(f64::NAN),
            energies: e.clone(),
            velocities: m.diagonal(),
            // built from the upper triangle so the antisymmetry is exact
            couplings: DMatrix::from_fn(d, d, |l, j| match l.cmp(&j) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Less => (e[l] - e[j]) * m[(l, j)],
                std::cmp::Ordering::Greater => -(e[j] - e[l]) * m[(j, l)],
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    fn pack(&self) -> Vec<f64> {
        let d = self.dim();
        let mut y = Vec::with_capacity(2 * d + d * (d - 1) / 2);
        y.extend(self.energies.iter());
        y.extend(self.velocities.iter());
        for l in 0..d {
            for j in l + 1..d {
                y.push(self.couplings[(l, j)]);
            }
        }
        y
    }

    fn unpack(lambda: f64, d: usize, y: &[f64]) -> Self {
        SpectrumState {
            lambda,
            energies: DVector::from_column_slice(&y[..d]),
            velocities: DVector::from_column_slice(&y[d..2 * d]),
            couplings: unpack_couplings(d, &y[2 * d..]),
        }
    }

    /// Closest pair of adjacent levels `(lower, gap)`.
    fn tightest_pair(&self) -> (usize, f64) {
        let e = &self.energies;
        (0..self.dim() - 1)
            .map(|l| (l, (e[l + 1] - e[l]).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::INFINITY))
    }
}

fn unpack_couplings(d: usize, packed: &[f64]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(d, d);
    let mut idx = 0;
    for l in 0..d {
        for j in l + 1..d {
            c[(l, j)] = packed[idx];
            c[(j, l)] = -packed[idx];
            idx += 1;
        }
    }
    c
}

/// Right-hand side evaluator with the singularity guard baked in.
struct PyFlow {
    dim: usize,
    floor: f64,
}

impl PyFlow {
    fn eval(&self, lambda: f64, energies: &[f64], couplings: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.dim;
        let mut inv2 = DMatrix::zeros(d, d);
        let mut dv = DVector::zeros(d);
        for l in 0..d {
            for k in l + 1..d {
                let diff = energies[l] - energies[k];
                if diff.abs() < self.floor {
                    let (lower, upper) = if energies[l] <= energies[k] { (l, k) } else { (k, l) };
                    return Err(Error::NearDegeneracy {
                        lambda,
                        lower,
                        upper,
                        gap: diff.abs(),
                    });
                }
                let r2 = diff.powi(2).recip();
                inv2[(l, k)] = r2;
                inv2[(k, l)] = r2;
                let w = 2.0 * couplings[(l, k)].powi(2) * r2 / diff;
                dv[l] += w;
                dv[k] -= w;
            }
        }
        let a = couplings.component_mul(&inv2);
        let dl = &a * couplings - couplings * &a;
        Ok((dv, dl))
    }
}

/// Phase-space point at `λ = 1` from exact diagonalization.
pub fn init_spectrum(pair: &HamiltonianPair) -> Result<SpectrumState> {
    let eig = diagonalize_at(pair, 1.0)?;
    let state = SpectrumState::from_eigensystem(pair, &eig);
    check_separation(pair, &state)?;
    Ok(state)
}

fn collision_floor(pair: &HamiltonianPair) -> f64 {
    COLLISION_FLOOR * pair.norm_at(1.0)
}

fn check_separation(pair: &HamiltonianPair, state: &SpectrumState) -> Result<()> {
    let (lower, gap) = state.tightest_pair();
    if gap < collision_floor(pair) {
        return Err(Error::NearDegeneracy {
            lambda: state.lambda,
            lower,
            upper: lower + 1,
            gap,
        });
    }
    Ok(())
}

/// `∂/∂λ` of the state:
/// `E' = v`, `v_ℓ' = Σ_k 2 l_ℓk² / (E_ℓ - E_k)³`,
/// `l_ℓj' = Σ_k l_ℓk l_kj (1/(E_ℓ - E_k)² - 1/(E_j - E_k)²)`.
pub fn py_rhs(state: &SpectrumState, pair: &HamiltonianPair) -> Result<SpectrumDerivative> {
    let flow = PyFlow {
        dim: state.dim(),
        floor: collision_floor(pair),
    };
    let (dv, dl) = flow.eval(state.lambda, state.energies.as_slice(), &state.couplings)?;
    Ok(SpectrumDerivative {
        energies: state.velocities.clone(),
        velocities: dv,
        couplings: dl,
    })
}

/// Tolerances for the level-dynamics integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PyOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for PyOptions {
    fn default() -> Self {
        PyOptions {
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        Some(&1.0) => {}
        _ => return Err(Error::InvalidArgument("lambda grid must start at 1".into())),
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) || grid.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
        return Err(Error::InvalidArgument(
            "lambda grid must be strictly descending within [0, 1]".into(),
        ));
    }
    Ok(())
}

/// Integrate the level dynamics from `λ = 1` down through every point of
/// `grid` (strictly descending, starting at 1).
pub fn integrate_py(pair: &HamiltonianPair, grid: &[f64], options: &PyOptions) -> Result<Vec<SpectrumState>> {
    check_grid(grid)?;
    let start = init_spectrum(pair)?;
    let d = start.dim();
    let flow = PyFlow {
        dim: d,
        floor: collision_floor(pair),
    };
    let control = StepControl {
        rtol: options.rtol,
        atol: options.atol,
        ..StepControl::default()
    };
    let npack = d * (d - 1) / 2;
    let mut out = Vec::with_capacity(grid.len());
    let result = ode::integrate(
        |lambda, y, dy| {
            let couplings = unpack_couplings(d, &y[2 * d..]);
            let (dv, dl) = flow.eval(lambda, &y[..d], &couplings)?;
            dy[..d].copy_from_slice(&y[d..2 * d]);
            dy[d..2 * d].copy_from_slice(dv.as_slice());
            let mut idx = 2 * d;
            for l in 0..d {
                for j in l + 1..d {
                    dy[idx] = dl[(l, j)];
                    idx += 1;
                }
            }
            debug_assert_eq!(idx, 2 * d + npack);
            Ok(())
        },
        1.0,
        &start.pack(),
        grid,
        &control,
        |lambda, y| {
            out.push(SpectrumState::unpack(lambda, d, y));
            Ok(())
        },
    );
    match result {
        Ok(_) => Ok(out),
        // step underflow: the flow is approaching a level collision
        Err(Error::IntegrationFailure(_)) => {
            let last = out.last().unwrap_or(&start);
            let (lower, gap) = last.tightest_pair();
            Err(Error::NearDegeneracy {
                lambda: last.lambda,
                lower,
                upper: lower + 1,
                gap,
            })
        }
        Err(e) => Err(e),
    }
}

/// Ground-state curvature from a phase-space point.
pub fn curvature(state: &SpectrumState) -> Result<CurvatureSample> {
    let e = &state.energies;
    if state.dim() < 2 || e[1] <= e[0] {
        return Err(Error::OrderingViolation {
            lambda: state.lambda,
            gap: if state.dim() < 2 { f64::NAN } else { e[1] - e[0] },
        });
    }
    let term = |k: usize| -2.0 * state.couplings[(0, k)].powi(2) / (e[k] - e[0]).powi(3);
    Ok(CurvatureSample {
        lambda: state.lambda,
        c2_pair: term(1),
        c2_full: (1..state.dim()).map(term).sum(),
    })
}

/// Curvature straight from an exact eigendecomposition,
/// `d²E₀/dλ² = 2 Σ_k ⟨k|H_b|0⟩² / (E₀ - E_k)`.
pub fn curvature_from_eigensystem(pair: &HamiltonianPair, eig: &EigenSystem) -> Result<CurvatureSample> {
    curvature(&SpectrumState::from_eigensystem(pair, eig))
}

/// Curvature versus `λ` on a uniform grid from 1 down to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    /// Descending in `λ`, first sample at 1, last at 0.
    pub samples: Vec<CurvatureSample>,
    /// The level-dynamics integration failed and the samples come from
    /// per-point diagonalization.
    pub diagonalization_fallback: bool,
}

impl CurvatureProfile {
    /// Build from samples, checking the descending `1 → 0` layout.
    pub fn new(samples: Vec<CurvatureSample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(
                "a curvature profile needs at least two samples".into(),
            ));
        }
        let lambdas: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
        check_grid(&lambdas)?;
        if *lambdas.last().unwrap() != 0.0 {
            return Err(Error::InvalidArgument(
                "curvature profile must end at lambda = 0".into(),
            ));
        }
        Ok(CurvatureProfile {
            samples,
            diagonalization_fallback: false,
        })
    }

    /// Linear interpolation of `c2_full` at `lambda`.
    pub fn c2_at(&self, lambda: f64) -> f64 {
        let s = &self.samples;
        // descending: find first sample with s.lambda <= lambda
        let idx = s.partition_point(|x| x.lambda > lambda);
        if idx == 0 {
            return s[0].c2_full;
        }
        if idx >= s.len() {
            return s[s.len() - 1].c2_full;
        }
        let (hi, lo) = (&s[idx - 1], &s[idx]);
        let w = (lambda - lo.lambda) / (hi.lambda - lo.lambda);
        lo.c2_full + w * (hi.c2_full - lo.c2_full)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.c2_full.abs()))
    }

    /// `lambda,c2_full,c2_pair` table with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["lambda", "c2_full", "c2_pair"])?;
        for s in &self.samples {
            w.write_record([
                crate::io::fmt_f64(s.lambda),
                crate::io::fmt_f64(s.c2_full),
                crate::io::fmt_f64(s.c2_pair),
            ])?;
        }
        w.flush()
    }
}

/// Uniform `λ` grid with `resolution` points from 1 down to 0.
pub fn descending_grid(resolution: usize) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution)
        .map(|i| {
            if i + 1 == resolution {
                0.0
            } else {
                1.0 - i as f64 / last
            }
        })
        .collect()
}

/// Dense curvature table from the level dynamics, falling back to
/// diagonalization if the flow hits a near-degeneracy.
pub fn curvature_profile(pair: &HamiltonianPair, resolution: usize) -> Result<CurvatureProfile> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "profile resolution must be at least 2, got {resolution}"
        )));
    }
    let grid = descending_grid(resolution);
    match integrate_py(pair, &grid, &PyOptions::default()) {
        Ok(states) => {
            let samples = states.iter().map(curvature).collect::<Result<Vec<_>>>()?;
            CurvatureProfile::new(samples)
        }
        Err(Error::NearDegeneracy { .. }) => {
            let samples = grid
                .iter()
                .map(|&l| curvature_from_eigensystem(pair, &diagonalize_at(pair, l)?))
                .collect::<Result<Vec<_>>>()?;
            let mut profile = CurvatureProfile::new(samples)?;
            profile.diagonalization_fallback = true;
            Ok(profile)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{sample_problem, BiasSpec, ProblemSpec};

    fn two_level(eps: f64, z: f64) -> HamiltonianPair {
        HamiltonianPair::with_bias(&ProblemSpec::explicit(1, vec![eps]).unwrap(), BiasSpec { n: 1, z }).unwrap()
    }

    fn random_pair(n: usize, seed: u64) -> HamiltonianPair {
        HamiltonianPair::from_problem(&sample_problem(n, seed).unwrap()).unwrap()
    }

    #[test]
    fn initial_velocity_two_level() {
        let (eps, z) = (1.3, 3.0);
        let s = init_spectrum(&two_level(eps, z)).unwrap();
        let expect = -z * z / (eps * eps + z * z).sqrt();
        assert!((s.velocities[0] - expect).abs() < 1e-12);
        assert_eq!(s.lambda, 1.0);
        assert_eq!(s.couplings[(0, 0)], 0.0);
        assert_eq!(s.couplings[(1, 1)], 0.0);
    }

    #[test]
    fn initial_state_invariants() {
        for seed in 0..10 {
            let pair = random_pair(3, seed);
            let s = init_spectrum(&pair).unwrap();
            assert!(s.velocities.sum().abs() < 1e-10 * pair.bias().norm());
            for l in 0..8 {
                assert_eq!(s.couplings[(l, l)], 0.0);
                for j in 0..8 {
                    assert!((s.couplings[(l, j)] + s.couplings[(j, l)]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn two_level_rhs_has_no_coupling_dynamics() {
        let pair = two_level(0.8, 2.0);
        let s = init_spectrum(&pair).unwrap();
        let ds = py_rhs(&s, &pair).unwrap();
        let l01 = s.couplings[(0, 1)];
        let gap = s.energies[0] - s.energies[1];
        assert!((ds.velocities[0] - 2.0 * l01 * l01 / gap.powi(3)).abs() < 1e-12);
        assert_eq!(ds.couplings[(0, 1)], 0.0);
        assert_eq!(ds.energies, s.velocities);
    }

    #[test]
    fn rhs_matches_finite_difference_of_velocity() {
        let pair = random_pair(3, 21);
        let h = 1e-5;
        for &lambda in &[0.9, 0.5, 0.2] {
            let at = |l: f64| SpectrumState::from_eigensystem(&pair, &diagonalize_at(&pair, l).unwrap());
            let s = at(lambda);
            let ds = py_rhs(&s, &pair).unwrap();
            let fd = (at(lambda + h).velocities - at(lambda - h).velocities) / (2.0 * h);
            for l in 0..8 {
                let rel = (ds.velocities[l] - fd[l]).abs() / fd[l].abs().max(1e-8);
                assert!(rel <= 1e-4, "lambda={lambda} level={l} rel={rel}");
            }
        }
    }

    #[test]
    fn rejects_collision() {
        let pair = random_pair(2, 3);
        let mut s = init_spectrum(&pair).unwrap();
        s.energies[1] = s.energies[0];
        assert!(matches!(py_rhs(&s, &pair), Err(Error::NearDegeneracy { .. })));
    }

    #[test]
    fn two_level_trajectory_matches_closed_form() {
        let (eps, z) = (0.9, 10f64.sqrt());
        let pair = two_level(eps, z);
        let grid = descending_grid(41);
        let states = integrate_py(&pair, &grid, &PyOptions::default()).unwrap();
        assert_eq!(states[0], init_spectrum(&pair).unwrap());
        for s in &states {
            let l = s.lambda;
            let r = (eps * eps + l * l * z * z).sqrt();
            assert!((s.energies[0] + r).abs() < 1e-8, "E0 at {l}");
            assert!((s.velocities[0] + l * z * z / r).abs() < 1e-7, "v0 at {l}");
        }
    }

    #[test]
    fn curvature_two_level_closed_form() {
        let (eps, z) = (0.6, 2.0);
        let pair = two_level(eps, z);
        for &l in &[1.0, 0.5, 0.1, 0.0] {
            let c = curvature_from_eigensystem(&pair, &diagonalize_at(&pair, l).unwrap()).unwrap();
            let expect = -eps * eps * z * z / (eps * eps + l * l * z * z).powf(1.5);
            assert!((c.c2_full - expect).abs() < 1e-10);
            assert_eq!(c.c2_full, c.c2_pair);
        }
    }

    #[test]
    fn curvature_sign_ordering() {
        for seed in 0..10 {
            let pair = random_pair(3, seed);
            for &l in &[1.0, 0.6, 0.3, 0.05] {
                let c = curvature_from_eigensystem(&pair, &diagonalize_at(&pair, l).unwrap()).unwrap();
                assert!(c.c2_full <= c.c2_pair && c.c2_pair <= 0.0);
            }
        }
    }

    #[test]
    fn curvature_rejects_misordered_levels() {
        let pair = random_pair(2, 1);
        let mut s = init_spectrum(&pair).unwrap();
        s.energies.swap_rows(0, 1);
        assert!(matches!(curvature(&s), Err(Error::OrderingViolation { .. })));
    }

    #[test]
    fn profile_grid_contract() {
        let pair = random_pair(2, 4);
        let p = curvature_profile(&pair, 2).unwrap();
        assert_eq!(p.samples.len(), 2);
        assert_eq!(p.samples[0].lambda, 1.0);
        assert_eq!(p.samples[1].lambda, 0.0);
        assert!(curvature_profile(&pair, 1).is_err());
    }

    #[test]
    fn two_level_profile_peaks_at_zero() {
        let p = curvature_profile(&two_level(-0.7, 10f64.sqrt()), 64).unwrap();
        let (argmax, _) = p
            .samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.c2_full.abs().total_cmp(&b.1.c2_full.abs()))
            .unwrap();
        assert_eq!(p.samples[argmax].lambda, 0.0);
    }

    #[test]
    fn interpolation_between_samples() {
        let p = CurvatureProfile::new(vec![
            CurvatureSample {
                lambda: 1.0,
                c2_pair: -1.0,
                c2_full: -1.0,
            },
            CurvatureSample {
                lambda: 0.0,
                c2_pair: -3.0,
                c2_full: -3.0,
            },
        ])
        .unwrap();
        assert_eq!(p.c2_at(1.0), -1.0);
        assert_eq!(p.c2_at(0.0), -3.0);
        assert!((p.c2_at(0.25) + 2.5).abs() < 1e-15);
    }
}
