//! Problem and bias Hamiltonians, the interpolated total Hamiltonian
//! `H(λ) = H_p + λ·H_b`, and the dense exact-diagonalization oracle.
//!
//! Basis convention: bit `i` of a computational-basis index (least
//! significant bit = qubit 1) is the state of qubit `i`. The same
//! little-endian rule selects which qubits carry `σ_z` in the coupling term
//! with index `j`, so the diagonal entry of that term on `|b⟩` is
//! `(-1)^popcount(j & b)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::WaveState;

/// Largest supported qubit count. The dense machinery is exact but cubic in
/// `2^n`.
pub const MAX_QUBITS: usize = 10;

/// Asymmetry allowed before a matrix is rejected as non-Hermitian.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Mix a master seed and an instance index into an instance seed
/// (SplitMix64 finalizer applied twice).
pub fn derive_seed(master_seed: u64, instance_index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master_seed) ^ instance_index)
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n}"
        )));
    }
    Ok(())
}

/// A random problem instance: one Gaussian coupling per non-empty subset of
/// qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    /// Seed that produced `epsilon`; `None` for hand-written instances.
    pub seed: Option<u64>,
    /// `epsilon[j - 1]` is the coupling of the term selected by the bits of `j`.
    pub epsilon: Vec<f64>,
}

impl ProblemSpec {
    /// An instance with explicit couplings.
    pub fn explicit(n: usize, epsilon: Vec<f64>) -> Result<Self> {
        let spec = ProblemSpec { n, seed: None, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_qubits(self.n)?;
        let expected = (1usize << self.n) - 1;
        if self.epsilon.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{} qubits need {expected} couplings, got {}",
                self.n,
                self.epsilon.len()
            )));
        }
        if self.epsilon.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("problem record: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Draw `2^n - 1` couplings from `N(0, n²)` with a ChaCha20 stream seeded by
/// `seed`.
pub fn sample_problem(n: usize, seed: u64) -> Result<ProblemSpec> {
    check_qubits(n)?;
    let sigma = (n * n) as f64;
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let epsilon = (0..(1usize << n) - 1).map(|_| normal.sample(&mut rng)).collect();
    Ok(ProblemSpec {
        n,
        seed: Some(seed),
        epsilon,
    })
}

/// Diagonal of `H_p` in the computational basis.
pub fn build_problem(spec: &ProblemSpec) -> Result<DVector<f64>> {
    spec.validate()?;
    let dim = 1usize << spec.n;
    Ok(DVector::from_fn(dim, |b, _| {
        spec.epsilon
            .iter()
            .enumerate()
            .map(|(idx, &eps)| {
                let j = idx + 1;
                if (j & b).count_ones() % 2 == 0 {
                    eps
                } else {
                    -eps
                }
            })
            .sum()
    }))
}

/// Transverse bias field strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub n: usize,
    pub z: f64,
}

impl BiasSpec {
    /// Field strength `Z = 10^(n/2)`.
    pub fn standard(n: usize) -> Self {
        BiasSpec {
            n,
            z: 10f64.powf(n as f64 / 2.0),
        }
    }

    pub fn new(n: usize, z: f64) -> Result<Self> {
        check_qubits(n)?;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bias strength must be positive, got {z}"
            )));
        }
        Ok(BiasSpec { n, z })
    }
}

/// `H_b = -Z Σ_i σ_x^(i)`, stored implicitly: row `b` holds `-Z` at every
/// `b ^ (1 << i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasOperator {
    n: usize,
    z: f64,
}

impl BiasOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if (row ^ col).count_ones() == 1 {
            -self.z
        } else {
            0.0
        }
    }

    /// `H_b · x` for a real vector.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (b, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..self.n {
                acc += x[b ^ (1 << i)];
            }
            *o = -self.z * acc;
        }
    }

    /// `H_b · M` column by column.
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let src = col.as_slice();
            let mut dst = out.column_mut(c);
            self.apply(src, dst.as_mut_slice());
        }
        out
    }

    /// Matrix elements `⟨ℓ|H_b|j⟩ = Vᵀ H_b V` in the eigenbasis `V`.
    pub fn in_basis(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        states.transpose() * self.apply_matrix(states)
    }

    /// Frobenius norm, `Z·sqrt(n·2^n)`.
    pub fn norm(&self) -> f64 {
        self.z * ((self.n * self.dim()) as f64).sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.entry(r, c))
    }
}

/// Build `-Z Σ_i σ_x^(i)` as a dense matrix.
pub fn build_bias(spec: &BiasSpec) -> Result<DMatrix<f64>> {
    let spec = BiasSpec::new(spec.n, spec.z)?;
    Ok(BiasOperator { n: spec.n, z: spec.z }.to_dense())
}

/// The problem/bias pair defining `H(λ) = H_p + λ·H_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPair {
    problem_diag: DVector<f64>,
    bias: BiasOperator,
    seed: Option<u64>,
}

impl HamiltonianPair {
    /// Pair from a problem instance and the standard `Z = 10^(n/2)` bias.
    pub fn from_problem(spec: &ProblemSpec) -> Result<Self> {
        Self::with_bias(spec, BiasSpec::standard(spec.n))
    }

    pub fn with_bias(spec: &ProblemSpec, bias: BiasSpec) -> Result<Self> {
        if bias.n != spec.n {
            return Err(Error::InvalidArgument(format!(
                "bias acts on {} qubits, problem on {}",
                bias.n, spec.n
            )));
        }
        let bias = BiasSpec::new(bias.n, bias.z)?;
        Ok(HamiltonianPair {
            problem_diag: build_problem(spec)?,
            bias: BiasOperator { n: bias.n, z: bias.z },
            seed: spec.seed,
        })
    }

    /// Pair from an arbitrary diagonal, e.g. an energy-shifted problem.
    pub fn from_diagonal(problem_diag: DVector<f64>, bias: BiasSpec) -> Result<Self> {
        let bias = BiasSpec::new(bias.n, bias.z)?;
        if problem_diag.len() != 1 << bias.n {
            return Err(Error::InvalidArgument(format!(
                "diagonal of length {} does not match {} qubits",
                problem_diag.len(),
                bias.n
            )));
        }
        Ok(HamiltonianPair {
            problem_diag,
            bias: BiasOperator { n: bias.n, z: bias.z },
            seed: None,
        })
    }

    /// Same pair with `c·𝟙` added to `H_p`.
    pub fn shifted(&self, c: f64) -> Self {
        HamiltonianPair {
            problem_diag: self.problem_diag.add_scalar(c),
            ..self.clone()
        }
    }

    /// Same pair with both operators multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let bias = BiasSpec::new(self.n(), self.bias.z * c)?;
        Ok(HamiltonianPair {
            problem_diag: &self.problem_diag * c,
            bias: BiasOperator { n: bias.n, z: bias.z },
            seed: self.seed,
        })
    }

    pub fn n(&self) -> usize {
        self.bias.n
    }

    pub fn dim(&self) -> usize {
        self.bias.dim()
    }

    pub fn z(&self) -> f64 {
        self.bias.z
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn problem_diag(&self) -> &DVector<f64> {
        &self.problem_diag
    }

    pub fn bias(&self) -> &BiasOperator {
        &self.bias
    }

    /// Frobenius norm of `H(λ)`; `H_p` and `H_b` are Frobenius-orthogonal.
    pub fn norm_at(&self, lambda: f64) -> f64 {
        (self.problem_diag.norm_squared() + (lambda * self.bias.norm()).powi(2)).sqrt()
    }

    /// Index of the smallest diagonal entry of `H_p`, i.e. `|0(λ=0)⟩`.
    pub fn problem_ground_index(&self) -> Result<usize> {
        ground_index(self.problem_diag.as_slice())
    }
}

/// Strict argmin of a diagonal; ties within `1e-12·spread` are an error.
pub fn ground_index(diag: &[f64]) -> Result<usize> {
    let (best, &min) = diag
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidArgument("empty diagonal".into()))?;
    let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tolerance = 1e-12 * (max - min);
    if let Some(other) = diag
        .iter()
        .enumerate()
        .position(|(i, &e)| i != best && e - min <= tolerance)
    {
        return Err(Error::DegenerateGroundState {
            first: best.min(other),
            second: best.max(other),
            tolerance,
        });
    }
    Ok(best)
}

/// Dense `H(λ) = H_p + λ·H_b`.
pub fn total_hamiltonian(pair: &HamiltonianPair, lambda: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(total_hamiltonian_unchecked(pair, lambda))
}

pub(crate) fn total_hamiltonian_unchecked(pair: &HamiltonianPair, lambda: f64) -> DMatrix<f64> {
    let d = pair.dim();
    let bias = &pair.bias;
    DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            pair.problem_diag[r]
        } else {
            lambda * bias.entry(r, c)
        }
    })
}

/// Full eigendecomposition at one point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Interpolation parameter the operator was built at, when known.
    pub lambda: Option<f64>,
    /// Ascending.
    pub energies: DVector<f64>,
    /// Column `ℓ` is `|ℓ⟩`; the largest-magnitude component of each column is
    /// positive.
    pub states: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ground_gap(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn diagonalize(h: &DMatrix<f64>) -> Result<EigenSystem> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.amax().max(1.0);
    let d = h.nrows();
    for r in 0..d {
        for c in r + 1..d {
            if (h[(r, c)] - h[(c, r)]).abs() > HERMITIAN_TOLERANCE * scale {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not Hermitian: entries ({r},{c}) and ({c},{r}) differ"
                )));
            }
        }
    }
    Ok(diagonalize_symmetric(h.clone()))
}

/// Eigendecomposition of `H(λ)` for a pair.
pub fn diagonalize_at(pair: &HamiltonianPair, lambda: f64) -> Result<EigenSystem> {
    let h = total_hamiltonian(pair, lambda)?;
    let mut eig = diagonalize_symmetric(h);
    eig.lambda = Some(lambda);
    Ok(eig)
}

pub(crate) fn diagonalize_symmetric(h: DMatrix<f64>) -> EigenSystem {
    let d = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut states = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let max = col.amax();
        let pivot = col.iter().position(|x| x.abs() >= (1.0 - 1e-8) * max).unwrap_or(0);
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        states.set_column(dst, &(col * sign));
    }
    EigenSystem {
        lambda: None,
        energies,
        states,
    }
}

/// Ground state of `H_b`: amplitude `2^(-n/2)` on every basis state.
pub fn bias_ground_state(n: usize) -> Result<WaveState> {
    check_qubits(n)?;
    let d = 1usize << n;
    let amp = Complex64::new((d as f64).sqrt().recip(), 0.0);
    Ok(WaveState {
        amplitudes: DVector::from_element(d, amp),
        lambda: None,
        t_elapsed: 0.0,
    })
}
