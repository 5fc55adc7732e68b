//! Frozen on-disk formats. Floats are written as the shortest decimal that
//! round-trips; missing values are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;
use sil_core::optim::{Method, StepRecord};
use sil_core::spectral::AuditPoint;

use crate::error::{io_err, Error, Result};
use crate::fit::{FitKind, ThresholdFit};
use crate::sweep::{CellSummary, CurvePoint, TrialRecord};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "overlap", "sq_overlap", "angle", "norm", "loss", "dist_sq"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "method",
    "d",
    "delta",
    "M",
    "seeds",
    "mean_sq_overlap",
    "std_sq_overlap",
    "mean_t_angle",
    "mean_t_norm",
    "failures",
];
pub const FIT_POINTS_HEADER: [&str; 4] = ["kind", "target", "d", "value"];
pub const FIT_LINES_HEADER: [&str; 5] = ["kind", "target", "slope", "intercept", "r2"];
pub const CURVES_HEADER: [&str; 8] = [
    "method",
    "d",
    "delta",
    "M",
    "t",
    "mean_sq_overlap",
    "mean_norm",
    "trials",
];
pub const TRIALS_HEADER: [&str; 15] = [
    "method",
    "d",
    "delta",
    "M",
    "seed",
    "n",
    "trial_seed",
    "sq_overlap",
    "overlap",
    "t_angle",
    "t_norm",
    "t_dist",
    "steps",
    "termination",
    "error",
];

pub const AUDIT_HEADER: [&str; 6] = ["t", "lambda1", "lambda2", "gap", "overlap", "flagged"];

pub const AUDIT_FILE: &str = "audit.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const SIDECAR_FILE: &str = "sweep.jsonl";
pub const TRAJECTORY_DIR: &str = "trajectories";
/// Present while a sweep is writing; left behind when it aborts.
pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Shortest round-trip decimal (Rust's `Debug` for f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

/// `{method}_d{d}_delta{δ}_M{M}_s{seed}.csv`
pub fn trajectory_file_name(method: Method, d: usize, delta: f64, m: f64, seed: usize) -> String {
    format!("{method}_d{d}_delta{}_M{}_s{seed}.csv", fmt_f64(delta), fmt_f64(m))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            detail: format!("{other:?}"),
        },
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trajectory(path: &Path, steps: &[StepRecord]) -> Result<()> {
    write_rows(
        path,
        &TRAJECTORY_HEADER,
        steps.iter().map(|s| {
            [
                s.t.to_string(),
                fmt_f64(s.overlap),
                fmt_f64(s.sq_overlap),
                fmt_f64(s.angle),
                fmt_f64(s.norm),
                fmt_f64(s.loss),
                fmt_f64(s.dist_sq),
            ]
        }),
    )
}

pub fn write_summaries(path: &Path, cells: &[CellSummary]) -> Result<()> {
    write_rows(
        path,
        &SUMMARY_HEADER,
        cells.iter().map(|c| {
            [
                c.method.to_string(),
                c.d.to_string(),
                fmt_f64(c.delta),
                fmt_f64(c.m),
                c.seeds.to_string(),
                fmt_opt_f64(c.mean_sq_overlap),
                fmt_opt_f64(c.std_sq_overlap),
                fmt_opt_f64(c.mean_t_angle),
                fmt_opt_f64(c.mean_t_norm),
                c.failures.to_string(),
            ]
        }),
    )
}

pub fn write_trials(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    write_rows(
        path,
        &TRIALS_HEADER,
        trials.iter().map(|r| {
            [
                r.method.to_string(),
                r.d.to_string(),
                fmt_f64(r.delta),
                fmt_f64(r.m),
                r.seed.to_string(),
                r.n.to_string(),
                r.trial_seed.to_string(),
                fmt_opt_f64(r.sq_overlap),
                fmt_opt_f64(r.overlap),
                fmt_opt(r.t_angle),
                fmt_opt(r.t_norm),
                fmt_opt(r.t_dist),
                fmt_opt(r.steps),
                r.termination.clone().unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_curves(path: &Path, curves: &[CurvePoint]) -> Result<()> {
    write_rows(
        path,
        &CURVES_HEADER,
        curves.iter().map(|c| {
            [
                c.method.to_string(),
                c.d.to_string(),
                fmt_f64(c.delta),
                fmt_f64(c.m),
                c.t.to_string(),
                fmt_f64(c.mean_sq_overlap),
                fmt_f64(c.mean_norm),
                c.trials.to_string(),
            ]
        }),
    )
}

pub fn write_audit(path: &Path, points: &[AuditPoint]) -> Result<()> {
    write_rows(
        path,
        &AUDIT_HEADER,
        points.iter().map(|p| {
            [
                p.t.to_string(),
                fmt_f64(p.report.lambda1),
                fmt_f64(p.report.lambda2),
                fmt_f64(p.report.gap()),
                fmt_opt_f64(p.report.overlap),
                p.flagged.to_string(),
            ]
        }),
    )
}

/// Writes the per-d values to `points` and the per-target lines to `lines`.
pub fn write_fit(points: &Path, lines: &Path, fit: &ThresholdFit) -> Result<()> {
    let kind = fit.kind.as_str();
    write_rows(
        points,
        &FIT_POINTS_HEADER,
        fit.points
            .iter()
            .map(|p| [kind.to_string(), fmt_f64(p.target), p.d.to_string(), fmt_f64(p.value)]),
    )?;
    write_rows(
        lines,
        &FIT_LINES_HEADER,
        fit.lines.iter().map(|l| {
            [
                kind.to_string(),
                fmt_f64(l.target),
                fmt_f64(l.slope),
                fmt_f64(l.intercept),
                fmt_f64(l.r2),
            ]
        }),
    )
}

/// File names used for a fit of the given kind inside an output directory.
pub fn fit_file_names(kind: FitKind) -> (String, String) {
    (
        format!("{}_fit.csv", kind.as_str()),
        format!("{}_fit_lines.csv", kind.as_str()),
    )
}

pub fn write_json_line(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let line = serde_json::to_string(value).expect("JSON values always serialize");
    writeln!(f, "{line}").map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            detail: format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(k, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: k + 2,
                detail: e.to_string(),
            })
        })
        .collect()
}

fn parse_method(path: &Path, s: &str) -> Result<Method> {
    s.parse().map_err(|e: sil_core::Error| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        detail: e.to_string(),
    })
}

#[derive(Deserialize)]
struct SummaryRow {
    method: String,
    d: usize,
    delta: f64,
    #[serde(rename = "M")]
    m: f64,
    seeds: usize,
    mean_sq_overlap: Option<f64>,
    std_sq_overlap: Option<f64>,
    mean_t_angle: Option<f64>,
    mean_t_norm: Option<f64>,
    failures: usize,
}

pub fn read_summaries(path: &Path) -> Result<Vec<CellSummary>> {
    read_rows::<SummaryRow>(path, &SUMMARY_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(CellSummary {
                method: parse_method(path, &r.method)?,
                d: r.d,
                delta: r.delta,
                m: r.m,
                seeds: r.seeds,
                mean_sq_overlap: r.mean_sq_overlap,
                std_sq_overlap: r.std_sq_overlap,
                mean_t_angle: r.mean_t_angle,
                mean_t_norm: r.mean_t_norm,
                failures: r.failures,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct CurveRow {
    method: String,
    d: usize,
    delta: f64,
    #[serde(rename = "M")]
    m: f64,
    t: usize,
    mean_sq_overlap: f64,
    mean_norm: f64,
    trials: usize,
}

pub fn read_curves(path: &Path) -> Result<Vec<CurvePoint>> {
    read_rows::<CurveRow>(path, &CURVES_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(CurvePoint {
                method: parse_method(path, &r.method)?,
                d: r.d,
                delta: r.delta,
                m: r.m,
                t: r.t,
                mean_sq_overlap: r.mean_sq_overlap,
                mean_norm: r.mean_norm,
                trials: r.trials,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct TrialRow {
    method: String,
    d: usize,
    delta: f64,
    #[serde(rename = "M")]
    m: f64,
    seed: usize,
    n: usize,
    trial_seed: u64,
    sq_overlap: Option<f64>,
    overlap: Option<f64>,
    t_angle: Option<usize>,
    t_norm: Option<usize>,
    t_dist: Option<usize>,
    steps: Option<usize>,
    termination: String,
    error: String,
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    read_rows::<TrialRow>(path, &TRIALS_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(TrialRecord {
                method: parse_method(path, &r.method)?,
                d: r.d,
                delta: r.delta,
                m: r.m,
                seed: r.seed,
                n: r.n,
                trial_seed: r.trial_seed,
                sq_overlap: r.sq_overlap,
                overlap: r.overlap,
                t_angle: r.t_angle,
                t_norm: r.t_norm,
                t_dist: r.t_dist,
                steps: r.steps,
                termination: (!r.termination.is_empty()).then_some(r.termination),
                error: (!r.error.is_empty()).then_some(r.error),
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct TrajectoryRow {
    t: usize,
    overlap: f64,
    sq_overlap: f64,
    angle: f64,
    norm: f64,
    loss: f64,
    dist_sq: f64,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<StepRecord>> {
    Ok(read_rows::<TrajectoryRow>(path, &TRAJECTORY_HEADER)?
        .into_iter()
        .map(|r| StepRecord {
            t: r.t,
            overlap: r.overlap,
            sq_overlap: r.sq_overlap,
            angle: r.angle,
            norm: r.norm,
            loss: r.loss,
            dist_sq: r.dist_sq,
        })
        .collect())
}
