//! Simulator for feedback-controlled adiabatic quantum computation.
//!
//! An `n`-qubit register evolves under `H(λ) = H_p + λ·H_b` while `λ` is
//! swept from 1 to 0. The sweep pace is either constant (linear
//! interpolation) or set by proportional feedback on the ground-state
//! curvature `d²E₀/dλ²`, which is obtained from the Pechukas–Yukawa level
//! dynamics.
//!
//! * [`hamiltonians`]: random problem instances, the transverse bias and
//!   exact diagonalization.
//! * [`spectral`]: level dynamics and the curvature signal.
//! * [`evolution`]: pace controllers, the wavefunction stepper, minimum gap
//!   and adiabatic time.
//! * [`experiments`]: ensemble studies (success probability versus time,
//!   time-to-target scaling, gain sweeps).
//! * [`io`] and [`cli`]: tables, manifests, profile replay and the
//!   command-line configuration.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod hamiltonians;
pub mod io;
mod ode;
pub mod spectral;

pub use error::{Error, Result};
pub use evolution::{evolve, EvolveOptions, PaceController, RunRecord, WaveState};
pub use hamiltonians::{sample_problem, HamiltonianPair, ProblemSpec};
