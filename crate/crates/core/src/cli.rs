//! Command-line configuration and orchestration.
//!
//! Settings come from flags, an optional flat TOML file (`--config`) and
//! built-in defaults, in that order of precedence. File keys are the long
//! flag names without the leading dashes (`master-seed = 3`). The output
//! directory defaults to `$FBAQC_OUT_DIR`, then `fbaqc-out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::evolution::{
    evolve_on_grid, feedback_time_per_gain, CurvatureFloor, CurvatureSource, GridOptions, PaceController, SpectralGrid,
};
use crate::experiments::{delta_p_sweep, scaling_study, sweep_t, ControllerFamily, DeltaPSpec, EnsembleSpec, Instance};
use crate::hamiltonians::{sample_problem, BiasSpec, HamiltonianPair, ProblemSpec, MAX_QUBITS};
use crate::io::{
    fig2_csv, fig3_csv, fig4_csv, line_plot_svg, profile_csv, replay_profile, trajectory_csv, Axes, Manifest,
    ManifestEntry, OutputDir, Provenance, Series, FIG2_FILE, FIG3_FILE, FIG4_FILE, MANIFEST_FILE,
};
use crate::spectral::{curvature_profile, PyOptions};

pub const OUT_DIR_ENV: &str = "FBAQC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "fbaqc-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evolve one instance and dump its trajectory.
    Run,
    /// Curvature profile of one instance.
    Profile,
    /// Success probability versus total time for both controllers.
    SweepT,
    /// Time-to-target scaling with qubit count.
    Scaling,
    /// Feedback gain sweep of the relative success-probability increase.
    Deltap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Profile => "profile",
            Command::SweepT => "sweep-t",
            Command::Scaling => "scaling",
            Command::Deltap => "deltap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Linear,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FloorMode {
    Relative,
    Absolute,
}

/// Every tunable, all optional; shared by the flag parser and the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Qubit count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Instance seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit couplings ε_1..ε_{2^n-1}, comma separated (replaces --seed).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Option<Vec<f64>>,
    /// Bias field strength; defaults to 10^(n/2).
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long, value_enum)]
    pub controller: Option<ControllerKind>,
    /// Feedback gain.
    #[arg(long)]
    pub k: Option<f64>,
    /// Total time; for feedback the gain is solved to realize it.
    #[arg(long)]
    pub t_total: Option<f64>,
    /// Curvature floor (fraction of peak |c2| in relative mode).
    #[arg(long)]
    pub curvature_floor: Option<f64>,
    #[arg(long, value_enum)]
    pub floor_mode: Option<FloorMode>,
    #[arg(long, value_enum)]
    pub curvature_source: Option<SourceKind>,
    /// Profile CSV for replay mode.
    #[arg(long)]
    pub replay_path: Option<PathBuf>,
    /// Points in a curvature profile.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Smallest swept T, in adiabatic times.
    #[arg(long)]
    pub t_min: Option<f64>,
    /// Largest swept T, in adiabatic times.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of swept T values.
    #[arg(long)]
    pub t_points: Option<usize>,
    /// Smallest swept gain.
    #[arg(long)]
    pub k_min: Option<f64>,
    /// Largest swept gain.
    #[arg(long)]
    pub k_max: Option<f64>,
    /// Number of swept gains.
    #[arg(long)]
    pub k_points: Option<usize>,
    /// Qubit counts for the scaling study, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    /// Instances per ensemble cell.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed from which every ensemble instance seed is derived.
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Success probability that time-to-target aims for.
    #[arg(long)]
    pub target_p: Option<f64>,
    /// Output directory; defaults to $FBAQC_OUT_DIR, then ./fbaqc-out.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Record every this many steps in the trajectory table.
    #[arg(long)]
    pub sample_stride: Option<usize>,
    /// Bound on eigenbasis rotation per step (radians).
    #[arg(long)]
    pub max_rotation: Option<f64>,
    /// Largest step in λ.
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Relative tolerance of the level-dynamics integrator.
    #[arg(long)]
    pub py_rtol: Option<f64>,
    /// Absolute tolerance of the level-dynamics integrator.
    #[arg(long)]
    pub py_atol: Option<f64>,
    /// Also write SVG plots.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plots: Option<bool>,
}

#[derive(Debug, Args)]
struct Invocation {
    /// Flat TOML file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Evolve one instance and dump its trajectory.
    Run(Invocation),
    /// Curvature profile of one instance.
    Profile(Invocation),
    /// Success probability versus total time for both controllers.
    SweepT(Invocation),
    /// Time-to-target scaling with qubit count.
    Scaling(Invocation),
    /// Feedback gain sweep of the relative success-probability increase.
    Deltap(Invocation),
}

#[derive(Debug, Parser)]
#[command(
    name = "fbaqc",
    version,
    about = "Feedback-controlled adiabatic quantum computation simulator"
)]
struct Cli {
    #[command(subcommand)]
    sub: Sub,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    pub seed: u64,
    pub epsilon: Option<Vec<f64>>,
    pub z: f64,
    pub controller: ControllerKind,
    pub k: Option<f64>,
    pub t_total: Option<f64>,
    pub floor: CurvatureFloor,
    pub source: SourceKind,
    pub replay_path: Option<PathBuf>,
    pub resolution: usize,
    /// `(min, max, points)` in adiabatic times, log-spaced.
    pub t_grid: (f64, f64, usize),
    /// `(min, max, points)`, log-spaced.
    pub k_grid: (f64, f64, usize),
    pub n_values: Vec<usize>,
    pub samples: usize,
    pub master_seed: u64,
    pub target_p: f64,
    pub out_dir: PathBuf,
    pub sample_stride: usize,
    pub grid: GridOptions,
    pub plots: bool,
    /// Every setting with its value and origin, for the manifest.
    pub provenance: BTreeMap<String, ManifestEntry>,
}

/// Result of argument parsing: a configuration, or text to print (help, version).
#[derive(Debug)]
pub enum Parsed {
    Config(Box<RunConfig>),
    Info(String),
}

/// Parse `argv` (including the program name), reading `--config` and
/// `$FBAQC_OUT_DIR` as needed.
pub fn parse_config<I, T>(argv: I) -> Result<Parsed>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    parse_config_with(argv, env_out)
}

/// As [`parse_config`], with the environment default passed explicitly.
pub fn parse_config_with<I, T>(argv: I, env_out_dir: Option<PathBuf>) -> Result<Parsed>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parsed::Info(e.to_string())),
                _ => Err(Error::Usage(e.to_string().trim_end().to_string())),
            };
        }
    };
    let (command, inv) = match cli.sub {
        Sub::Run(i) => (Command::Run, i),
        Sub::Profile(i) => (Command::Profile, i),
        Sub::SweepT(i) => (Command::SweepT, i),
        Sub::Scaling(i) => (Command::Scaling, i),
        Sub::Deltap(i) => (Command::Deltap, i),
    };
    let file = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_settings_file(&text, path)?
        }
        None => Settings::default(),
    };
    resolve(command, &inv.settings, &file, env_out_dir).map(|c| Parsed::Config(Box::new(c)))
}

/// Parse a flat TOML settings file.
pub fn parse_settings_file(text: &str, path: &Path) -> Result<Settings> {
    toml::from_str(text).map_err(|e| Error::Usage(format!("{}: {}", path.display(), e.message())))
}

struct Resolver<'a> {
    flags: &'a Settings,
    file: &'a Settings,
    provenance: BTreeMap<String, ManifestEntry>,
}

impl Resolver<'_> {
    fn record<T: Serialize>(&mut self, key: &str, value: &T, source: Provenance) {
        let value = serde_json::to_value(value).expect("setting serializes");
        self.provenance.insert(key.to_string(), ManifestEntry { value, source });
    }

    fn pick<T: Serialize + Clone>(
        &mut self,
        key: &str,
        get: impl Fn(&Settings) -> Option<T>,
        default: impl FnOnce() -> T,
    ) -> T {
        let (value, source) = match (get(self.flags), get(self.file)) {
            (Some(v), _) => (v, Provenance::Flag),
            (None, Some(v)) => (v, Provenance::File),
            (None, None) => (default(), Provenance::Default),
        };
        self.record(key, &value, source);
        value
    }

    fn pick_opt<T: Serialize + Clone>(&mut self, key: &str, get: impl Fn(&Settings) -> Option<T>) -> Option<T> {
        let (value, source) = match (get(self.flags), get(self.file)) {
            (Some(v), _) => (Some(v), Provenance::Flag),
            (None, Some(v)) => (Some(v), Provenance::File),
            (None, None) => (None, Provenance::Default),
        };
        self.record(key, &value, source);
        value
    }

    fn explicit(&self, key: &str) -> bool {
        self.provenance
            .get(key)
            .is_some_and(|e| e.source != Provenance::Default)
    }
}

fn usage(key: &str, message: impl std::fmt::Display) -> Error {
    Error::Usage(format!("{key}: {message}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(key, format!("must be a positive number, got {v}")))
    }
}

fn resolve(command: Command, flags: &Settings, file: &Settings, env_out: Option<PathBuf>) -> Result<RunConfig> {
    let mut r = Resolver {
        flags,
        file,
        provenance: BTreeMap::new(),
    };
    let n = r.pick("n", |s| s.n, || 2);
    let seed = r.pick("seed", |s| s.seed, || 0);
    let epsilon = r.pick_opt("epsilon", |s| s.epsilon.clone());
    let z = r.pick("z", |s| s.z, || BiasSpec::standard(n).z);
    let controller = r.pick("controller", |s| s.controller, || ControllerKind::Feedback);
    let k = r.pick_opt("k", |s| s.k);
    let t_total = r.pick_opt("t-total", |s| s.t_total);
    let floor_value = r.pick("curvature-floor", |s| s.curvature_floor, || 1e-6);
    let floor_mode = r.pick("floor-mode", |s| s.floor_mode, || FloorMode::Relative);
    let source = r.pick("curvature-source", |s| s.curvature_source, || SourceKind::Live);
    let replay_path = r.pick_opt("replay-path", |s| s.replay_path.clone());
    let resolution = r.pick("resolution", |s| s.resolution, || 512);
    let t_min = r.pick("t-min", |s| s.t_min, || 0.1);
    let t_max = r.pick("t-max", |s| s.t_max, || 10.0);
    let t_points = r.pick("t-points", |s| s.t_points, || 61);
    let k_min = r.pick("k-min", |s| s.k_min, || 0.01);
    let k_max = r.pick("k-max", |s| s.k_max, || 10.0);
    let k_points = r.pick("k-points", |s| s.k_points, || 19);
    let n_values = r.pick("n-values", |s| s.n_values.clone(), || vec![2, 3, 4, 5]);
    let samples = r.pick("samples", |s| s.samples, || 100);
    let master_seed = r.pick("master-seed", |s| s.master_seed, || 0);
    let target_p = r.pick("target-p", |s| s.target_p, || 0.9);
    let out_dir = match (&flags.out_dir, &file.out_dir, env_out) {
        (Some(p), _, _) => {
            r.record("out-dir", p, Provenance::Flag);
            p.clone()
        }
        (None, Some(p), _) => {
            r.record("out-dir", p, Provenance::File);
            p.clone()
        }
        (None, None, Some(p)) => {
            r.record("out-dir", &p, Provenance::Environment);
            p
        }
        (None, None, None) => {
            let p = PathBuf::from(DEFAULT_OUT_DIR);
            r.record("out-dir", &p, Provenance::Default);
            p
        }
    };
    let sample_stride = r.pick("sample-stride", |s| s.sample_stride, || 10);
    let defaults = GridOptions::default();
    let max_rotation = r.pick("max-rotation", |s| s.max_rotation, || defaults.max_rotation);
    let max_step = r.pick("max-step", |s| s.max_step, || defaults.max_step);
    let py_rtol = r.pick("py-rtol", |s| s.py_rtol, || defaults.py.rtol);
    let py_atol = r.pick("py-atol", |s| s.py_atol, || defaults.py.atol);
    let plots = r.pick("plots", |s| s.plots, || false);

    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(usage("n", format!("must lie in 1..={MAX_QUBITS}, got {n}")));
    }
    if let Some(eps) = &epsilon {
        if eps.len() != (1 << n) - 1 {
            return Err(usage(
                "epsilon",
                format!("expected 2^n - 1 = {} values, got {}", (1 << n) - 1, eps.len()),
            ));
        }
        if r.explicit("seed") {
            return Err(usage("seed", "not valid together with explicit epsilon"));
        }
    }
    positive("z", z)?;
    let ensemble = matches!(command, Command::Scaling | Command::Deltap);
    if ensemble && r.explicit("z") {
        return Err(usage("z", "ensemble commands use the standard field 10^(n/2)"));
    }
    if ensemble && (epsilon.is_some() || r.explicit("seed")) {
        return Err(usage(
            if epsilon.is_some() { "epsilon" } else { "seed" },
            "ensemble commands draw instances from master-seed",
        ));
    }
    match controller {
        ControllerKind::Linear => {
            if k.is_some() {
                return Err(usage("k", "not valid with controller = linear"));
            }
            if source == SourceKind::Replay {
                return Err(usage("curvature-source", "replay requires controller = feedback"));
            }
        }
        ControllerKind::Feedback => {
            if k.is_some() && t_total.is_some() {
                return Err(usage("k", "give either k or t-total for a feedback run, not both"));
            }
        }
    }
    if let Some(k) = k {
        positive("k", k)?;
    }
    if let Some(t) = t_total {
        positive("t-total", t)?;
    }
    if command == Command::Run && k.is_none() && t_total.is_none() {
        return Err(usage(
            "t-total",
            match controller {
                ControllerKind::Linear => "required for a linear run",
                ControllerKind::Feedback => "a feedback run needs k or t-total",
            },
        ));
    }
    positive("curvature-floor", floor_value)?;
    if floor_mode == FloorMode::Relative && floor_value >= 1.0 {
        return Err(usage("curvature-floor", "relative floor must be below 1"));
    }
    let floor = match floor_mode {
        FloorMode::Relative => CurvatureFloor::RelativeToPeak(floor_value),
        FloorMode::Absolute => CurvatureFloor::Absolute(floor_value),
    };
    match (source, &replay_path) {
        (SourceKind::Replay, None) => return Err(usage("replay-path", "required when curvature-source = replay")),
        (SourceKind::Live, Some(_)) => return Err(usage("replay-path", "only valid with curvature-source = replay")),
        _ => {}
    }
    if source == SourceKind::Replay && command != Command::Run {
        return Err(usage(
            "curvature-source",
            "replay is only available for the run command",
        ));
    }
    if resolution < 2 {
        return Err(usage("resolution", "must be at least 2"));
    }
    positive("t-min", t_min)?;
    positive("t-max", t_max)?;
    if t_max <= t_min || t_points < 2 {
        return Err(usage("t-max", "T grid needs t-max > t-min and t-points >= 2"));
    }
    positive("k-min", k_min)?;
    positive("k-max", k_max)?;
    if k_max <= k_min || k_points < 2 {
        return Err(usage("k-max", "gain grid needs k-max > k-min and k-points >= 2"));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) || n_values.iter().any(|&v| !(1..=MAX_QUBITS).contains(&v)) {
        return Err(usage(
            "n-values",
            format!("must be ascending and within 1..={MAX_QUBITS}"),
        ));
    }
    if samples == 0 {
        return Err(usage("samples", "must be at least 1"));
    }
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(usage("target-p", format!("must lie in (0, 1), got {target_p}")));
    }
    if sample_stride == 0 {
        return Err(usage("sample-stride", "must be at least 1"));
    }
    positive("max-rotation", max_rotation)?;
    positive("max-step", max_step)?;
    positive("py-rtol", py_rtol)?;
    positive("py-atol", py_atol)?;

    Ok(RunConfig {
        command,
        n,
        seed,
        epsilon,
        z,
        controller,
        k,
        t_total,
        floor,
        source,
        replay_path,
        resolution,
        t_grid: (t_min, t_max, t_points),
        k_grid: (k_min, k_max, k_points),
        n_values,
        samples,
        master_seed,
        target_p,
        out_dir,
        sample_stride,
        grid: GridOptions {
            max_rotation,
            max_step,
            py: PyOptions {
                rtol: py_rtol,
                atol: py_atol,
            },
            ..defaults
        },
        plots,
        provenance: r.provenance,
    })
}

/// `points` values from `lo` to `hi`, evenly spaced in `ln`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i + 1 == points => hi,
            i => lo * (hi / lo).powf(i as f64 / last),
        })
        .collect()
}

impl RunConfig {
    pub fn pair(&self) -> Result<HamiltonianPair> {
        let spec = match &self.epsilon {
            Some(eps) => ProblemSpec::explicit(self.n, eps.clone())?,
            None => sample_problem(self.n, self.seed)?,
        };
        HamiltonianPair::with_bias(&spec, BiasSpec::new(self.n, self.z)?)
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

/// Run the configured command and write its outputs and manifest.
pub fn execute(config: &RunConfig) -> Result<Report> {
    let mut out = OutputDir::new(&config.out_dir);
    let (results, summary) = match config.command {
        Command::Run => run_single(config, &mut out)?,
        Command::Profile => run_profile(config, &mut out)?,
        Command::SweepT => run_sweep(config, &mut out)?,
        Command::Scaling => run_scaling(config, &mut out)?,
        Command::Deltap => run_deltap(config, &mut out)?,
    };
    let manifest = Manifest {
        command: config.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.provenance.clone(),
        outputs: out.written().to_vec(),
        results,
    };
    out.write(MANIFEST_FILE, manifest.to_json().as_bytes())?;
    Ok(Report {
        outputs: out.written().iter().map(|n| out.path(n)).collect(),
        summary,
    })
}

fn plot(out: &mut OutputDir, config: &RunConfig, name: &str, axes: Axes, series: Vec<Series>) -> Result<()> {
    if config.plots {
        out.write(name, line_plot_svg(&axes, &series).as_bytes())?;
    }
    Ok(())
}

fn run_single(config: &RunConfig, out: &mut OutputDir) -> Result<(serde_json::Value, String)> {
    let pair = config.pair()?;
    let grid = SpectralGrid::build(&pair, &config.grid)?;
    let controller = match config.controller {
        ControllerKind::Linear => PaceController::linear(config.t_total.expect("validated"))?,
        ControllerKind::Feedback => {
            let source = match &config.replay_path {
                Some(path) => CurvatureSource::Replay(Arc::new(replay_profile(path)?)),
                None => CurvatureSource::Live,
            };
            let gain = match (config.k, config.t_total) {
                (Some(k), _) => k,
                (None, Some(t)) => t / feedback_time_per_gain(&grid, config.floor, &source)?,
                (None, None) => unreachable!("validated"),
            };
            PaceController::feedback_with(gain, config.floor, source)?
        }
    };
    let record = evolve_on_grid(&grid, &controller, Some(config.sample_stride))?;
    let rows = record.samples.as_deref().unwrap_or_default();
    out.write("trajectory.csv", &trajectory_csv(rows))?;
    plot(
        out,
        config,
        "trajectory.svg",
        Axes {
            title: "instantaneous ground-state population",
            x_label: "lambda",
            y_label: "P",
            ..Axes::default()
        },
        vec![Series {
            name: controller.kind().to_string(),
            points: rows.iter().map(|r| (r.lambda, r.p_instantaneous)).collect(),
        }],
    )?;
    let gain = match &record.controller {
        PaceController::Feedback { gain, .. } => Some(*gain),
        PaceController::Linear { .. } => None,
    };
    let results = json!({
        "P": record.p,
        "T": record.t,
        "k": gain,
        "norm_drift": record.norm_drift,
        "steps": record.steps,
        "curvature_fallback": record.curvature_fallback,
    });
    let summary = format!(
        "{} run: n={} P={} T={} steps={}",
        controller.kind(),
        record.n,
        record.p,
        record.t,
        record.steps
    );
    Ok((results, summary))
}

fn run_profile(config: &RunConfig, out: &mut OutputDir) -> Result<(serde_json::Value, String)> {
    let pair = config.pair()?;
    let profile = curvature_profile(&pair, config.resolution)?;
    out.write("profile.csv", &profile_csv(&profile))?;
    plot(
        out,
        config,
        "profile.svg",
        Axes {
            title: "ground-state curvature",
            x_label: "lambda",
            y_label: "|d2E0/dlambda2|",
            log_y: true,
            ..Axes::default()
        },
        vec![Series {
            name: "c2_full".into(),
            points: profile.samples.iter().map(|s| (s.lambda, s.c2_full.abs())).collect(),
        }],
    )?;
    let peak = profile
        .samples
        .iter()
        .max_by(|a, b| a.c2_full.abs().total_cmp(&b.c2_full.abs()))
        .expect("profile has samples");
    let results = json!({
        "peak_abs_c2": peak.c2_full.abs(),
        "peak_lambda": peak.lambda,
        "diagonalization_fallback": profile.diagonalization_fallback,
    });
    let summary = format!(
        "profile: {} points, peak |c2| = {} at lambda = {}",
        profile.samples.len(),
        peak.c2_full.abs(),
        peak.lambda
    );
    Ok((results, summary))
}

fn run_sweep(config: &RunConfig, out: &mut OutputDir) -> Result<(serde_json::Value, String)> {
    let pair = config.pair()?;
    let instance = Instance::new(&pair, &config.grid)?;
    let (lo, hi, points) = config.t_grid;
    let t_values: Vec<f64> = log_grid(lo, hi, points).iter().map(|f| f * instance.t_ad).collect();
    let families = [
        ControllerFamily::Linear,
        ControllerFamily::Feedback { floor: config.floor },
    ];
    let curve = sweep_t(&instance, &families, &t_values)?;
    out.write(FIG2_FILE, &fig2_csv(&curve))?;
    let series = families
        .iter()
        .map(|f| Series {
            name: f.name().to_string(),
            points: curve
                .iter()
                .filter(|p| p.controller == f.name())
                .map(|p| (p.t, p.p))
                .collect(),
        })
        .collect();
    plot(
        out,
        config,
        "fig2_curve.svg",
        Axes {
            title: "success probability versus total time",
            x_label: "T",
            y_label: "P",
            log_x: true,
            ..Axes::default()
        },
        series,
    )?;
    let results = json!({
        "t_ad": instance.t_ad,
        "min_gap": instance.min_gap,
        "initial_overlap": instance.initial_overlap,
    });
    let summary = format!("sweep-t: {} points per controller, T_ad = {}", points, instance.t_ad);
    Ok((results, summary))
}

fn run_scaling(config: &RunConfig, out: &mut OutputDir) -> Result<(serde_json::Value, String)> {
    let spec = EnsembleSpec {
        families: vec![
            ControllerFamily::Linear,
            ControllerFamily::Feedback { floor: config.floor },
        ],
        target_p: config.target_p,
        grid: config.grid,
        ..EnsembleSpec::new(config.n_values.clone(), config.samples, config.master_seed)
    };
    let summary = scaling_study(&spec)?;
    out.write(FIG3_FILE, &fig3_csv(&summary))?;
    let series = spec
        .families
        .iter()
        .map(|f| Series {
            name: f.name().to_string(),
            points: summary
                .cells
                .iter()
                .filter(|c| c.controller == f.name())
                .map(|c| (c.n as f64, c.mean_t))
                .collect(),
        })
        .collect();
    plot(
        out,
        config,
        "fig3_scaling.svg",
        Axes {
            title: "mean time to target",
            x_label: "n",
            y_label: "T",
            log_x: true,
            log_y: true,
        },
        series,
    )?;
    let excluded: Vec<_> = summary
        .cells
        .iter()
        .map(|c| json!({"n": c.n, "controller": c.controller, "excluded": c.excluded, "non_monotone": c.non_monotone}))
        .collect();
    let text = summary
        .fits
        .iter()
        .map(|f| {
            format!(
                "{}: T ~ n^{:.3} (rms log residual {:.3})",
                f.controller, f.fit.exponent, f.fit.residual
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let results = json!({ "fits": summary.fits, "cells": excluded });
    Ok((results, format!("scaling: {text}")))
}

fn run_deltap(config: &RunConfig, out: &mut OutputDir) -> Result<(serde_json::Value, String)> {
    let (lo, hi, points) = config.k_grid;
    let spec = DeltaPSpec {
        floor: config.floor,
        grid: config.grid,
        ..DeltaPSpec::new(log_grid(lo, hi, points), config.n, config.samples, config.master_seed)
    };
    let summary = delta_p_sweep(&spec)?;
    out.write(FIG4_FILE, &fig4_csv(&summary))?;
    plot(
        out,
        config,
        "fig4_deltap.svg",
        Axes {
            title: "mean relative success-probability increase",
            x_label: "k",
            y_label: "<dP>",
            log_x: true,
            ..Axes::default()
        },
        vec![Series {
            name: "feedback vs linear".into(),
            points: summary.rows.iter().map(|r| (r.k, r.mean_dp)).collect(),
        }],
    )?;
    let best = summary
        .rows
        .iter()
        .filter(|r| r.mean_dp.is_finite())
        .max_by(|a, b| a.mean_dp.total_cmp(&b.mean_dp));
    let excluded: Vec<_> = summary
        .rows
        .iter()
        .map(|r| json!({"k": r.k, "excluded": r.excluded}))
        .collect();
    let results = json!({
        "best_k": best.map(|r| r.k),
        "best_mean_dP": best.map(|r| r.mean_dp),
        "rows": excluded,
    });
    let summary = match best {
        Some(b) => format!("deltap: best k = {} with <dP> = {}", b.k, b.mean_dp),
        None => "deltap: no finite rows".to_string(),
    };
    Ok((results, summary))
}
