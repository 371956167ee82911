use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{diagonalize_at, HamiltonianPair};
use crate::spectral::descending_grid;

/// Location and size of the smallest ground gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinGap {
    pub gap: f64,
    pub lambda: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimize `f` on `[lo, hi]` by golden-section search; returns `(x, f(x))`.
pub fn golden_section_min<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
        }
    }
    // endpoints are not probed by the interior search
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x)?;
        if fx < best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Dense scan plus golden-section refinement around the best sample.
fn scan_refine<F>(mut f: F, resolution: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!(
            "scan resolution must be at least 16, got {resolution}"
        )));
    }
    let grid = descending_grid(resolution);
    let values = grid.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
    let (best, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let hi = grid[best.saturating_sub(1)];
    let lo = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section_min(&mut f, lo, hi, 1e-12)?;
    Ok(if refined.1 <= values[best] {
        refined
    } else {
        (grid[best], values[best])
    })
}

/// Smallest `E₁ - E₀` over `λ ∈ [0, 1]`.
pub fn min_gap(pair: &HamiltonianPair, resolution: usize) -> Result<MinGap> {
    let (lambda, gap) = scan_refine(|l| Ok(diagonalize_at(pair, l)?.ground_gap()), resolution)?;
    Ok(MinGap { gap, lambda })
}

/// `max_j max_λ |⟨j|H_b|0⟩| / Δ_min²`.
pub fn adiabatic_time(pair: &HamiltonianPair, resolution: usize) -> Result<f64> {
    let element = |l: f64| -> Result<f64> {
        let eig = diagonalize_at(pair, l)?;
        let hb0 = eig.states.transpose() * pair.bias().apply_matrix(&eig.states.columns(0, 1).into_owned());
        let largest = (1..eig.dim()).fold(0.0f64, |m, j| m.max(hb0[j].abs()));
        Ok(-largest)
    };
    let (_, neg) = scan_refine(element, resolution)?;
    let gap = min_gap(pair, resolution)?.gap;
    Ok(-neg / (gap * gap))
}

/// Tank-circuit parameters for the measurement back-action condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionWindow {
    pub delta_min: f64,
    pub omega_lc: f64,
    pub gamma_lc: f64,
}

/// The gap frequency lies outside the tank resonance `ω_LC ± γ_LC` (ħ = 1).
pub fn backaction_window_ok(w: &BackactionWindow) -> bool {
    w.delta_min > w.omega_lc + w.gamma_lc || w.delta_min < w.omega_lc - w.gamma_lc
}
