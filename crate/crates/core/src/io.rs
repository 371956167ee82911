//! Output tables, run manifests, curvature-profile replay and SVG line plots.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers never observe a partial table. Floats use the shortest decimal
//! form that parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::TrajectoryRow;
use crate::experiments::{CurvePoint, DeltaPSummary, EnsembleSummary};
use crate::spectral::{CurvatureProfile, CurvatureSample};

pub const FIG2_FILE: &str = "fig2_curve.csv";
pub const FIG3_FILE: &str = "fig3_scaling.csv";
pub const FIG4_FILE: &str = "fig4_deltap.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Shortest round-trip decimal representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".fbaqc-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<I>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // writing into a Vec cannot fail
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn fig2_csv(points: &[CurvePoint]) -> Vec<u8> {
    csv_bytes(
        &["controller", "T", "P"],
        points
            .iter()
            .map(|p| vec![p.controller.to_string(), fmt_f64(p.t), fmt_f64(p.p)]),
    )
}

pub fn fig3_csv(summary: &EnsembleSummary) -> Vec<u8> {
    csv_bytes(
        &["n", "controller", "meanT", "stdT", "count"],
        summary.cells.iter().map(|c| {
            vec![
                c.n.to_string(),
                c.controller.to_string(),
                fmt_f64(c.mean_t),
                fmt_f64(c.std_t),
                c.count.to_string(),
            ]
        }),
    )
}

pub fn fig4_csv(summary: &DeltaPSummary) -> Vec<u8> {
    csv_bytes(
        &["k", "mean_dP", "std_dP", "count"],
        summary
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.k), fmt_f64(r.mean_dp), fmt_f64(r.std_dp), r.count.to_string()]),
    )
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> Vec<u8> {
    csv_bytes(
        &["lambda", "t", "P_instantaneous", "gap", "abs_curvature"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.lambda),
                fmt_f64(r.t),
                fmt_f64(r.p_instantaneous),
                fmt_f64(r.gap),
                fmt_f64(r.abs_curvature),
            ]
        }),
    )
}

pub fn profile_csv(profile: &CurvatureProfile) -> Vec<u8> {
    let mut out = Vec::new();
    profile.write_csv(&mut out).expect("in-memory csv");
    out
}

/// One row of a re-read scaling table.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Row {
    pub n: usize,
    pub controller: String,
    pub mean_t: f64,
    pub std_t: f64,
    pub count: usize,
}

fn format_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| format_err(path, line, format!("{name}: cannot parse {raw:?}")))
}

pub fn read_fig3(path: &Path) -> Result<Vec<Fig3Row>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 5 {
            return Err(format_err(
                path,
                line,
                format!("expected 5 fields, found {}", record.len()),
            ));
        }
        rows.push(Fig3Row {
            n: parse_field(path, line, "n", &record[0])?,
            controller: record[1].to_string(),
            mean_t: parse_field(path, line, "meanT", &record[2])?,
            std_t: parse_field(path, line, "stdT", &record[3])?,
            count: parse_field(path, line, "count", &record[4])?,
        });
    }
    Ok(rows)
}

/// Parse a `(λ, c2)` table; a third `c2_pair` column and a header row are optional.
pub fn parse_profile(text: &str, path: &Path) -> Result<CurvatureProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples: Vec<CurvatureSample> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| format_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            first = false;
            continue;
        }
        first = false;
        if !(2..=3).contains(&record.len()) {
            return Err(format_err(
                path,
                line,
                format!("expected 2 or 3 fields, found {}", record.len()),
            ));
        }
        let lambda: f64 = parse_field(path, line, "lambda", &record[0])?;
        let c2: f64 = parse_field(path, line, "c2", &record[1])?;
        let c2_pair: f64 = match record.get(2) {
            Some(raw) => parse_field(path, line, "c2_pair", raw)?,
            None => c2,
        };
        if !lambda.is_finite() || !c2.is_finite() {
            return Err(format_err(path, line, "non-finite value"));
        }
        if let Some(prev) = samples.last() {
            if lambda >= prev.lambda {
                return Err(format_err(
                    path,
                    line,
                    format!("lambda must strictly decrease, {lambda} follows {}", prev.lambda),
                ));
            }
        } else if lambda != 1.0 {
            return Err(format_err(
                path,
                line,
                format!("profile must start at lambda = 1, found {lambda}"),
            ));
        }
        samples.push(CurvatureSample {
            lambda,
            c2_full: c2,
            c2_pair,
        });
    }
    let end_line = text.lines().count() as u64;
    match samples.last() {
        None => Err(format_err(path, end_line, "empty profile")),
        Some(s) if s.lambda != 0.0 => Err(format_err(
            path,
            end_line,
            format!("profile must end at lambda = 0, found {}", s.lambda),
        )),
        Some(_) if samples.len() < 2 => Err(format_err(path, end_line, "profile needs at least two rows")),
        Some(_) => CurvatureProfile::new(samples),
    }
}

/// Load a curvature profile for offline (replay) feedback control.
pub fn replay_profile(path: &Path) -> Result<CurvatureProfile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profile(&text, path)
}

/// Where a configuration value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Default,
    Environment,
    File,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub value: serde_json::Value,
    pub source: Provenance,
}

/// Fully resolved configuration plus headline results of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, ManifestEntry>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Writes outputs into one directory and remembers their names.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputDir {
            root: root.into(),
            written: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// A named polyline for [`line_plot_svg`].
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal standalone SVG line plot.
pub fn line_plot_svg(axes: &Axes, series: &[Series]) -> String {
    let (w, h, margin) = (640.0, 420.0, 60.0);
    let tx = |x: f64| if axes.log_x { x.log10() } else { x };
    let ty = |y: f64| if axes.log_y { y.log10() } else { y };
    let usable = |x: f64, y: f64| tx(x).is_finite() && ty(y).is_finite();
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| usable(p.0, p.1));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(tx(x));
        x1 = x1.max(tx(x));
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| margin + (tx(x) - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (ty(y) - y0) / (y1 - y0) * (h - 2.0 * margin);
    let axis_value = |v: f64, log: bool| if log { 10f64.powf(v) } else { v };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(axes.title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = margin,
        t = margin,
        b = h - margin,
        r = w - margin
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let px = margin + f * (w - 2.0 * margin);
        let py = h - margin - f * (h - 2.0 * margin);
        let _ = writeln!(
            s,
            r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            h - margin + 16.0,
            tick(axis_value(xv, axes.log_x))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            margin - 6.0,
            py + 4.0,
            tick(axis_value(yv, axes.log_y))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 16.0,
        escape(axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(axes.y_label)
    );
    for (i, series) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = series
            .points
            .iter()
            .filter(|p| usable(p.0, p.1))
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        let ly = margin + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            w - margin,
            escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
