//! Adaptive `λ` grid carrying everything the wavefunction stepper needs from
//! the instantaneous spectrum.
//!
//! The grid depends only on the Hamiltonian pair, never on the schedule, so
//! one grid serves every controller and every total time for an instance.
//! Step lengths are chosen so the instantaneous eigenbasis rotates by at most
//! `max_rotation` radians per step.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonians::{diagonalize_symmetric, total_hamiltonian_unchecked, EigenSystem, HamiltonianPair};
use crate::spectral::{curvature, curvature_from_eigensystem, integrate_py, PyOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Largest step in `λ`.
    pub max_step: f64,
    /// Smallest step in `λ`; the rotation bound is waived below it.
    pub min_step: f64,
    /// Bound on eigenbasis rotation per step (radians).
    pub max_rotation: f64,
    pub py: PyOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            max_step: 2e-3,
            min_step: 1e-9,
            max_rotation: 0.01,
            py: PyOptions::default(),
        }
    }
}

/// One grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub energies: DVector<f64>,
    /// Diagonalization-based `d²E₀/dλ²`.
    pub c2_exact: f64,
}

impl GridPoint {
    pub fn gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }
}

/// A step from `nodes[k]` to `nodes[k + 1]` through its midpoint.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GridStep {
    pub mid: GridPoint,
    /// Upper triangle (row-major, `ℓ < m`) of `⟨ℓ|∂_λ m⟩` at the midpoint.
    pub frame_rate: Vec<f64>,
}

#[derive(Debug)]
pub struct SpectralGrid {
    dim: usize,
    pub(crate) nodes: Vec<GridPoint>,
    pub(crate) steps: Vec<GridStep>,
    final_states: DMatrix<f64>,
    initial_states: DMatrix<f64>,
    py_options: PyOptions,
    pair: HamiltonianPair,
    live_c2: OnceLock<Option<Vec<f64>>>,
}

fn align_signs(states: &mut DMatrix<f64>, reference: &DMatrix<f64>) {
    for c in 0..states.ncols() {
        if states.column(c).dot(&reference.column(c)) < 0.0 {
            states.column_mut(c).neg_mut();
        }
    }
}

struct Frame {
    eig: EigenSystem,
    /// `⟨ℓ|∂_λ m⟩ = ⟨ℓ|H_b|m⟩ / (E_m - E_ℓ)` for `ℓ < m`.
    rate: Vec<f64>,
    /// Largest row norm of the frame-rate matrix.
    speed: f64,
    c2: f64,
}

impl Frame {
    fn new(pair: &HamiltonianPair, lambda: f64, reference: Option<&DMatrix<f64>>) -> Result<Self> {
        let mut eig = diagonalize_symmetric(total_hamiltonian_unchecked(pair, lambda));
        eig.lambda = Some(lambda);
        if let Some(r) = reference {
            align_signs(&mut eig.states, r);
        }
        let d = eig.dim();
        let m = pair.bias().in_basis(&eig.states);
        let e = &eig.energies;
        let mut rate = Vec::with_capacity(d * (d - 1) / 2);
        let mut rows = vec![0.0; d];
        let floor = crate::spectral::COLLISION_FLOOR * pair.norm_at(1.0);
        for l in 0..d {
            for k in l + 1..d {
                let gap = e[k] - e[l];
                if gap < floor {
                    return Err(Error::NearDegeneracy {
                        lambda,
                        lower: l,
                        upper: k,
                        gap,
                    });
                }
                let g = m[(l, k)] / gap;
                rate.push(g);
                rows[l] += g * g;
                rows[k] += g * g;
            }
        }
        let speed = rows.into_iter().fold(0.0, f64::max).sqrt();
        let c2 = 2.0 * (1..d).map(|k| m[(k, 0)].powi(2) / (e[0] - e[k])).sum::<f64>();
        Ok(Frame { eig, rate, speed, c2 })
    }

    fn point(&self) -> GridPoint {
        GridPoint {
            lambda: self.eig.lambda.unwrap_or(f64::NAN),
            energies: self.eig.energies.clone(),
            c2_exact: self.c2,
        }
    }
}

impl SpectralGrid {
    pub fn build(pair: &HamiltonianPair, options: &GridOptions) -> Result<Self> {
        if !(options.max_step > 0.0 && options.min_step > 0.0 && options.max_rotation > 0.0) {
            return Err(Error::InvalidArgument("grid options must be positive".into()));
        }
        if pair.dim() < 2 {
            return Err(Error::InvalidArgument("need at least two levels".into()));
        }
        let mut current = Frame::new(pair, 1.0, None)?;
        let initial_states = current.eig.states.clone();
        let mut nodes = vec![current.point()];
        let mut steps = Vec::new();
        let mut lambda = 1.0f64;
        while lambda > 0.0 {
            let mut h = (options.max_rotation / current.speed)
                .min(options.max_step)
                .max(options.min_step);
            let (mid, next) = loop {
                if lambda - h < 0.5 * options.min_step {
                    h = lambda;
                }
                let mid = Frame::new(pair, lambda - 0.5 * h, Some(&current.eig.states))?;
                if mid.speed * h > 2.0 * options.max_rotation && h > options.min_step {
                    h = (options.max_rotation / mid.speed).max(options.min_step);
                    continue;
                }
                let next_lambda = if h == lambda { 0.0 } else { lambda - h };
                let next = Frame::new(pair, next_lambda, Some(&mid.eig.states))?;
                if next.speed * h > 3.0 * options.max_rotation && h > options.min_step {
                    h = (options.max_rotation / next.speed).max(options.min_step);
                    continue;
                }
                break (mid, next);
            };
            steps.push(GridStep {
                mid: mid.point(),
                frame_rate: mid.rate,
            });
            lambda = next.eig.lambda.unwrap_or(0.0);
            nodes.push(next.point());
            current = next;
        }
        Ok(SpectralGrid {
            dim: pair.dim(),
            nodes,
            steps,
            final_states: current.eig.states,
            initial_states,
            py_options: options.py,
            pair: pair.clone(),
            live_c2: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pair(&self) -> &HamiltonianPair {
        &self.pair
    }

    pub fn nodes(&self) -> &[GridPoint] {
        &self.nodes
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Eigenvectors at `λ = 1` (column 0 is the initial state).
    pub fn initial_states(&self) -> &DMatrix<f64> {
        &self.initial_states
    }

    /// Eigenvectors at `λ = 0`, sign-continuous with the rest of the sweep.
    pub fn final_states(&self) -> &DMatrix<f64> {
        &self.final_states
    }

    /// All `λ` the stepper visits: node, midpoint, node, ..., descending.
    pub fn sample_lambdas(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.steps.len() + 1);
        out.push(self.nodes[0].lambda);
        for (step, node) in self.steps.iter().zip(&self.nodes[1..]) {
            out.push(step.mid.lambda);
            out.push(node.lambda);
        }
        out
    }

    /// Exact curvature at every sample point, in `sample_lambdas` order.
    pub fn exact_curvature(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.steps.len() + 1);
        out.push(self.nodes[0].c2_exact);
        for (step, node) in self.steps.iter().zip(&self.nodes[1..]) {
            out.push(step.mid.c2_exact);
            out.push(node.c2_exact);
        }
        out
    }

    /// Curvature from the level dynamics integrated on the stepper's own
    /// points, or `None` when the flow hit a near-degeneracy.
    pub fn live_curvature(&self) -> Option<&[f64]> {
        self.live_c2
            .get_or_init(|| {
                let lambdas = self.sample_lambdas();
                let states = integrate_py(&self.pair, &lambdas, &self.py_options).ok()?;
                states
                    .iter()
                    .map(|s| curvature(s).map(|c| c.c2_full))
                    .collect::<Result<Vec<_>>>()
                    .ok()
            })
            .as_deref()
    }

    /// Diagonalization-based curvature at an arbitrary `λ`.
    pub fn curvature_at(&self, lambda: f64) -> Result<f64> {
        let eig = crate::hamiltonians::diagonalize_at(&self.pair, lambda)?;
        Ok(curvature_from_eigensystem(&self.pair, &eig)?.c2_full)
    }
}
