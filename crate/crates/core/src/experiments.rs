//! Ensemble experiments: success probability versus total time, time needed
//! to reach a target success probability and its scaling with qubit count,
//! and the relative gain of feedback over linear interpolation as a function
//! of the controller gain.
//!
//! Instances are evaluated on the rayon pool and reduced in instance order,
//! so every table is a pure function of its inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{
    adiabatic_time, evolve_on_grid, feedback_time_per_gain, min_gap, CurvatureFloor, CurvatureSource, GridOptions,
    PaceController, RunRecord, SpectralGrid,
};
use crate::hamiltonians::{derive_seed, sample_problem, HamiltonianPair};

/// Resolution of the dense scans behind the minimum gap and adiabatic time.
pub const SCAN_RESOLUTION: usize = 64;

/// A controller template; the total time (or gain) is filled in per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerFamily {
    Linear,
    Feedback { floor: CurvatureFloor },
}

impl ControllerFamily {
    pub fn feedback() -> Self {
        ControllerFamily::Feedback {
            floor: CurvatureFloor::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControllerFamily::Linear => "linear",
            ControllerFamily::Feedback { .. } => "feedback",
        }
    }
}

/// A problem instance with everything the experiments reuse across runs.
#[derive(Debug)]
pub struct Instance {
    pub grid: SpectralGrid,
    pub t_ad: f64,
    pub min_gap: f64,
    /// Sudden-limit success probability `|⟨0_p|0(λ=1)⟩|²`.
    pub initial_overlap: f64,
}

impl Instance {
    pub fn new(pair: &HamiltonianPair, grid: &GridOptions) -> Result<Self> {
        let ground = pair.problem_ground_index()?;
        let t_ad = adiabatic_time(pair, SCAN_RESOLUTION)?;
        let min_gap = min_gap(pair, SCAN_RESOLUTION)?.gap;
        let grid = SpectralGrid::build(pair, grid)?;
        let initial_overlap = grid.initial_states()[(ground, 0)].powi(2);
        Ok(Instance {
            grid,
            t_ad,
            min_gap,
            initial_overlap,
        })
    }

    /// Random instance `(n, seed)` with the standard bias.
    pub fn sample(n: usize, seed: u64, grid: &GridOptions) -> Result<Self> {
        Self::new(&HamiltonianPair::from_problem(&sample_problem(n, seed)?)?, grid)
    }

    pub fn pair(&self) -> &HamiltonianPair {
        self.grid.pair()
    }

    /// Controller from `family` that realizes total time `total_time`.
    pub fn controller_for_time(&self, family: &ControllerFamily, total_time: f64) -> Result<PaceController> {
        match family {
            ControllerFamily::Linear => PaceController::linear(total_time),
            ControllerFamily::Feedback { floor } => {
                let per_gain = feedback_time_per_gain(&self.grid, *floor, &CurvatureSource::Live)?;
                PaceController::feedback_with(total_time / per_gain, *floor, CurvatureSource::Live)
            }
        }
    }

    pub fn run(&self, controller: &PaceController) -> Result<RunRecord> {
        evolve_on_grid(&self.grid, controller, None)
    }

    /// Run `family` at total time `total_time`.
    pub fn run_for_time(&self, family: &ControllerFamily, total_time: f64) -> Result<RunRecord> {
        self.run(&self.controller_for_time(family, total_time)?)
    }
}

/// One point of a success-probability curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub controller: &'static str,
    /// Realized total time.
    pub t: f64,
    pub p: f64,
}

/// `P(T)` for each family on the same instance.
pub fn sweep_t(instance: &Instance, families: &[ControllerFamily], t_values: &[f64]) -> Result<Vec<CurvePoint>> {
    if t_values.iter().any(|&t| t.is_nan() || t <= 0.0) || t_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("T values must be positive and ascending".into()));
    }
    let mut out = Vec::with_capacity(families.len() * t_values.len());
    for family in families {
        for &t in t_values {
            let run = instance.run_for_time(family, t)?;
            out.push(CurvePoint {
                controller: family.name(),
                t: run.t,
                p: run.p,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSearch {
    /// Start of the doubling scan, in units of the adiabatic time.
    pub floor: f64,
    /// Give up beyond this many adiabatic times.
    pub cap: f64,
    /// Relative width of the final bracket.
    pub rel_tol: f64,
}

impl Default for TargetSearch {
    fn default() -> Self {
        TargetSearch {
            floor: 1e-3,
            cap: 1e6,
            rel_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeToTarget {
    /// Smallest verified total time with `P ≥ target` (up to `rel_tol`).
    pub t: f64,
    pub p: f64,
    /// Largest time known to miss the target; 0 when the scan floor already hits it.
    pub t_below: f64,
    pub evaluations: usize,
    /// `P` decreased somewhere along the doubling scan.
    pub non_monotone: bool,
}

/// First crossing of `target_p` from a doubling scan, refined by bisection.
pub fn time_to_target(
    instance: &Instance,
    family: &ControllerFamily,
    target_p: f64,
    search: &TargetSearch,
) -> Result<TimeToTarget> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target P must lie in (0, 1), got {target_p}"
        )));
    }
    let mut evaluations = 0;
    let mut p_at = |t: f64| -> Result<f64> {
        evaluations += 1;
        Ok(instance.run_for_time(family, t)?.p)
    };
    let cap = search.cap * instance.t_ad;
    let mut t = search.floor * instance.t_ad;
    let mut p = p_at(t)?;
    let mut non_monotone = false;
    if p >= target_p {
        return Ok(TimeToTarget {
            t,
            p,
            t_below: 0.0,
            evaluations,
            non_monotone,
        });
    }
    let mut lo = t;
    loop {
        t *= 2.0;
        if t > cap {
            return Err(Error::UnreachableTarget { target: target_p, cap });
        }
        let next = p_at(t)?;
        non_monotone |= next < p;
        p = next;
        if p >= target_p {
            break;
        }
        lo = t;
    }
    let (mut hi, mut p_hi) = (t, p);
    while hi / lo - 1.0 > search.rel_tol {
        let mid = (lo * hi).sqrt();
        let pm = p_at(mid)?;
        if pm >= target_p {
            hi = mid;
            p_hi = pm;
        } else {
            lo = mid;
        }
    }
    Ok(TimeToTarget {
        t: hi,
        p: p_hi,
        t_below: lo,
        evaluations,
        non_monotone,
    })
}

/// `ln T = a + b ln n` by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln T`.
    pub residual: f64,
}

/// Fit over `(n, T)` points; order of the input does not matter.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut distinct = pts.iter().map(|p| p.0.to_bits()).collect::<Vec<_>>();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::FitUnderdetermined(distinct.len()));
    }
    if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::InvalidArgument(
            "power-law fit needs positive finite data".into(),
        ));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(PowerLawFit {
        exponent,
        intercept,
        residual,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_values: Vec<usize>,
    pub samples_per_n: usize,
    pub master_seed: u64,
    pub families: Vec<ControllerFamily>,
    pub target_p: f64,
    pub search: TargetSearch,
    #[serde(skip, default)]
    pub grid: GridOptions,
}

impl EnsembleSpec {
    pub fn new(n_values: Vec<usize>, samples_per_n: usize, master_seed: u64) -> Self {
        EnsembleSpec {
            n_values,
            samples_per_n,
            master_seed,
            families: vec![ControllerFamily::Linear, ControllerFamily::feedback()],
            target_p: 0.9,
            search: TargetSearch::default(),
            grid: GridOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_n == 0 {
            return Err(Error::InvalidArgument("samples per n must be at least 1".into()));
        }
        if !(self.target_p > 0.0 && self.target_p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target P must lie in (0, 1), got {}",
                self.target_p
            )));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) || self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(
                "qubit counts must be ascending and at least 2".into(),
            ));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one controller family is required".into(),
            ));
        }
        Ok(())
    }
}

/// Statistics of one `(n, controller)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingCell {
    pub n: usize,
    pub controller: &'static str,
    pub mean_t: f64,
    pub std_t: f64,
    pub count: usize,
    pub excluded: usize,
    /// Instances whose doubling scan saw `P` decrease.
    pub non_monotone: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub controller: &'static str,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub cells: Vec<ScalingCell>,
    pub fits: Vec<ScalingFit>,
}

/// Mean time-to-target per `(n, controller)` and power-law exponents.
pub fn scaling_study(spec: &EnsembleSpec) -> Result<EnsembleSummary> {
    spec.validate()?;
    if spec.n_values.len() < 3 {
        return Err(Error::FitUnderdetermined(spec.n_values.len()));
    }
    let mut cells = Vec::new();
    for &n in &spec.n_values {
        let per_instance: Vec<Result<Vec<Result<TimeToTarget>>>> = (0..spec.samples_per_n as u64)
            .into_par_iter()
            .map(|idx| {
                let instance = Instance::sample(n, derive_seed(spec.master_seed, idx), &spec.grid)?;
                Ok(spec
                    .families
                    .iter()
                    .map(|family| time_to_target(&instance, family, spec.target_p, &spec.search))
                    .collect())
            })
            .collect();
        let mut times = vec![Vec::new(); spec.families.len()];
        let mut excluded = vec![0usize; spec.families.len()];
        let mut non_monotone = vec![0usize; spec.families.len()];
        for result in per_instance {
            let runs = match result {
                Ok(runs) => runs,
                Err(e) if e.is_instance_exclusion() => {
                    excluded.iter_mut().for_each(|x| *x += 1);
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (f, run) in runs.into_iter().enumerate() {
                match run {
                    Ok(hit) => {
                        times[f].push(hit.t);
                        non_monotone[f] += usize::from(hit.non_monotone);
                    }
                    Err(e) if e.is_instance_exclusion() => excluded[f] += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        for (f, family) in spec.families.iter().enumerate() {
            let (mean_t, std_t) = mean_std(&times[f]);
            cells.push(ScalingCell {
                n,
                controller: family.name(),
                mean_t,
                std_t,
                count: times[f].len(),
                excluded: excluded[f],
                non_monotone: non_monotone[f],
            });
        }
    }
    let fits = spec
        .families
        .iter()
        .map(|family| {
            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.controller == family.name() && c.count > 0)
                .map(|c| (c.n as f64, c.mean_t))
                .collect();
            Ok(ScalingFit {
                controller: family.name(),
                fit: fit_power_law(&points)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSummary { cells, fits })
}

/// Equal-time comparison of one instance at one gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaPRecord {
    pub instance: usize,
    pub k: f64,
    /// Realized feedback time, reused as the linear total time.
    pub t: f64,
    pub p_fb: f64,
    pub p_lin: f64,
}

impl DeltaPRecord {
    pub fn delta_p(&self) -> f64 {
        (self.p_fb - self.p_lin) / self.p_lin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaPRow {
    pub k: f64,
    pub mean_dp: f64,
    pub std_dp: f64,
    pub count: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaPSummary {
    pub rows: Vec<DeltaPRow>,
    pub records: Vec<DeltaPRecord>,
}

/// Linear success probabilities below this are treated as zero.
const P_LIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaPSpec {
    pub k_values: Vec<f64>,
    pub n: usize,
    pub samples: usize,
    pub master_seed: u64,
    pub floor: CurvatureFloor,
    #[serde(skip, default)]
    pub grid: GridOptions,
}

impl DeltaPSpec {
    pub fn new(k_values: Vec<f64>, n: usize, samples: usize, master_seed: u64) -> Self {
        DeltaPSpec {
            k_values,
            n,
            samples,
            master_seed,
            floor: CurvatureFloor::default(),
            grid: GridOptions::default(),
        }
    }
}

/// Mean relative gain `(P_fb - P_lin) / P_lin` per controller gain, with the
/// linear run given exactly the feedback run's total time.
pub fn delta_p_sweep(spec: &DeltaPSpec) -> Result<DeltaPSummary> {
    if spec.k_values.iter().any(|&k| k.is_nan() || k <= 0.0) || spec.k_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("gains must be positive and ascending".into()));
    }
    if spec.samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let per_instance: Vec<Result<Vec<DeltaPRecord>>> = (0..spec.samples)
        .into_par_iter()
        .map(|idx| {
            let instance = Instance::sample(spec.n, derive_seed(spec.master_seed, idx as u64), &spec.grid)?;
            spec.k_values
                .iter()
                .map(|&k| {
                    let fb = instance.run(&PaceController::feedback_with(k, spec.floor, CurvatureSource::Live)?)?;
                    let lin = instance.run(&PaceController::linear(fb.t)?)?;
                    Ok(DeltaPRecord {
                        instance: idx,
                        k,
                        t: fb.t,
                        p_fb: fb.p,
                        p_lin: lin.p,
                    })
                })
                .collect()
        })
        .collect();

    let mut records = Vec::new();
    let mut failed = 0;
    for r in per_instance {
        match r {
            Ok(recs) => records.extend(recs),
            Err(e) if e.is_instance_exclusion() => failed += 1,
            Err(e) => return Err(e),
        }
    }
    let rows = spec
        .k_values
        .iter()
        .map(|&k| {
            let mut dps = Vec::new();
            let mut excluded = failed;
            for r in records.iter().filter(|r| r.k == k) {
                if r.p_lin < P_LIN_FLOOR {
                    excluded += 1;
                } else {
                    dps.push(r.delta_p());
                }
            }
            let (mean_dp, std_dp) = mean_std(&dps);
            DeltaPRow {
                k,
                mean_dp,
                std_dp,
                count: dps.len(),
                excluded,
            }
        })
        .collect();
    Ok(DeltaPSummary { rows, records })
}
