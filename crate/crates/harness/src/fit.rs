//! Threshold fits: for each d, the smallest δ (or step count) at which the
//! mean squared overlap reaches a target, then a least-squares line of that
//! threshold against ln d.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sil_core::diagnostics::linear_fit;

use crate::error::{config, Error, Result};
use crate::sweep::{CellSummary, CurvePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitKind {
    /// δ⋆(d, target) from per-cell terminal overlaps.
    Threshold,
    /// T⋆(d, target) from mean overlap curves.
    Time,
}

impl FitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitKind::Threshold => "threshold",
            FitKind::Time => "time",
        }
    }
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(FitKind::Threshold),
            "time" => Ok(FitKind::Time),
            other => config(format!("unknown fit kind `{other}` (expected threshold or time)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitPoint {
    pub target: f64,
    pub d: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitLine {
    pub target: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of d values the line was fitted on.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Unfittable {
    pub target: f64,
    /// `None` when the whole target lacks enough fittable d values for a line.
    pub d: Option<usize>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdFit {
    pub kind: FitKind,
    /// Sorted by (target, d).
    pub points: Vec<FitPoint>,
    /// One per target with at least two fittable d values.
    pub lines: Vec<FitLine>,
    pub unfittable: Vec<Unfittable>,
    /// d values whose thresholds decrease somewhere as the target increases.
    pub non_monotone: Vec<usize>,
}

impl ThresholdFit {
    pub fn line(&self, target: f64) -> Option<&FitLine> {
        self.lines.iter().find(|l| l.target == target)
    }

    pub fn value(&self, d: usize, target: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.d == d && p.target == target)
            .map(|p| p.value)
    }
}

/// Nondecreasing least-squares fit to `y` (pool adjacent violators).
pub fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 <= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("len > 1") = (s0 + s1, c0 + c1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// First x at which the piecewise-linear curve through (x, y) reaches
/// `target`, for nondecreasing y. `Err` carries the reason when the grid does
/// not bracket the target.
pub fn inverse_interpolate(x: &[f64], y: &[f64], target: f64) -> std::result::Result<f64, String> {
    let Some(k) = y.iter().position(|&v| v >= target) else {
        return Err(format!(
            "never reached (max {:.4})",
            y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        ));
    };
    if k == 0 {
        return Err(format!("already reached at the smallest grid value {}", x[0]));
    }
    let (x0, x1, y0, y1) = (x[k - 1], x[k], y[k - 1], y[k]);
    Ok(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
}

fn sorted_targets(targets: &[f64]) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return config("no target levels given");
    }
    if let Some(t) = targets.iter().find(|t| !(t.is_finite() && **t > 0.0 && **t <= 1.0)) {
        return config(format!("target {t} is not a squared overlap in (0, 1]"));
    }
    let mut t = targets.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Shared core: per-d curves of (x, mean squared overlap) sorted by x.
fn fit_curves(kind: FitKind, curves: BTreeMap<usize, Vec<(f64, f64)>>, targets: &[f64]) -> Result<ThresholdFit> {
    let targets = sorted_targets(targets)?;
    let mut points = Vec::new();
    let mut unfittable = Vec::new();
    let mut non_monotone = Vec::new();
    for (&d, curve) in &curves {
        let x: Vec<f64> = curve.iter().map(|p| p.0).collect();
        let y = isotonic_increasing(&curve.iter().map(|p| p.1).collect::<Vec<_>>());
        let mut prev = f64::NEG_INFINITY;
        let mut monotone = true;
        for &target in &targets {
            match inverse_interpolate(&x, &y, target) {
                Ok(value) => {
                    monotone &= value >= prev;
                    prev = value;
                    points.push(FitPoint { target, d, value });
                }
                Err(reason) => unfittable.push(Unfittable {
                    target,
                    d: Some(d),
                    reason,
                }),
            }
        }
        if !monotone {
            non_monotone.push(d);
        }
    }
    points.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.d.cmp(&b.d)));

    let mut lines = Vec::new();
    for &target in &targets {
        let at: Vec<&FitPoint> = points.iter().filter(|p| p.target == target).collect();
        if at.len() < 2 {
            unfittable.push(Unfittable {
                target,
                d: None,
                reason: format!("only {} fittable d value(s); a line needs 2", at.len()),
            });
            continue;
        }
        let lx: Vec<f64> = at.iter().map(|p| (p.d as f64).ln()).collect();
        let ly: Vec<f64> = at.iter().map(|p| p.value).collect();
        let (slope, intercept, r2) = linear_fit(&lx, &ly);
        lines.push(FitLine {
            target,
            slope,
            intercept,
            r2,
            points: at.len(),
        });
    }
    Ok(ThresholdFit {
        kind,
        points,
        lines,
        unfittable,
        non_monotone,
    })
}

/// δ⋆(d, target) per d from cell summaries of a single (method, M) sweep.
/// Cells whose trials all failed are skipped.
pub fn threshold_fit(summaries: &[CellSummary], targets: &[f64]) -> Result<ThresholdFit> {
    let Some(first) = summaries.first() else {
        return config("threshold fit needs at least one summary row");
    };
    if let Some(c) = summaries
        .iter()
        .find(|c| c.method != first.method || c.m.to_bits() != first.m.to_bits())
    {
        return config(format!(
            "threshold fit mixes sweeps: ({}, M={}) and ({}, M={})",
            first.method, first.m, c.method, c.m
        ));
    }
    let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for c in summaries {
        if let Some(v) = c.mean_sq_overlap {
            curves.entry(c.d).or_default().push((c.delta, v));
        }
    }
    for curve in curves.values_mut() {
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    fit_curves(FitKind::Threshold, curves, targets)
}

/// T⋆(d, target) per d: first step at which the (isotonically smoothed) mean
/// squared-overlap curve reaches the target. All curves must share one
/// (method, δ, M).
pub fn time_fit(curves: &[CurvePoint], targets: &[f64]) -> Result<ThresholdFit> {
    let Some(first) = curves.first() else {
        return config("time fit needs at least one curve point");
    };
    if let Some(c) = curves
        .iter()
        .find(|c| c.method != first.method || c.m.to_bits() != first.m.to_bits() || c.delta != first.delta)
    {
        return config(format!(
            "time fit mixes sweeps: ({}, δ={}, M={}) and ({}, δ={}, M={})",
            first.method, first.delta, first.m, c.method, c.delta, c.m
        ));
    }
    let mut by_d: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for c in curves {
        by_d.entry(c.d).or_default().push((c.t as f64, c.mean_sq_overlap));
    }
    for curve in by_d.values_mut() {
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    fit_curves(FitKind::Time, by_d, targets)
}
