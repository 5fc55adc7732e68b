//! Threshold and time fits on constructed laws, plus the bookkeeping of
//! unfittable targets and the fit CSV files.

use proptest::prelude::*;
use sil_core::optim::Method;
use sil_harness::fit::{isotonic_increasing, FitKind};
use sil_harness::output::{fit_file_names, write_fit, FIT_LINES_HEADER, FIT_POINTS_HEADER};
use sil_harness::{threshold_fit, time_fit, CellSummary, CurvePoint};

const DS: [usize; 5] = [64, 128, 256, 512, 1024];

fn cell(d: usize, delta: f64, v: f64) -> CellSummary {
    CellSummary {
        method: Method::SphericalGd,
        d,
        delta,
        m: f64::INFINITY,
        seeds: 32,
        mean_sq_overlap: Some(v),
        std_sq_overlap: Some(0.0),
        mean_t_angle: None,
        mean_t_norm: None,
        failures: 0,
    }
}

fn curve(d: usize, t: usize, v: f64) -> CurvePoint {
    CurvePoint {
        method: Method::EuclideanGd,
        d,
        delta: 10.0,
        m: 8.0,
        t,
        mean_sq_overlap: v,
        mean_norm: 1.0,
        trials: 64,
    }
}

/// overlap = min(1, δ/(2 ln d)) on δ = 0.25, 0.5, ..., 20.
fn log_law_cells() -> Vec<CellSummary> {
    DS.iter()
        .flat_map(|&d| {
            (1..=80).map(move |k| {
                let delta = 0.25 * k as f64;
                cell(d, delta, (delta / (2.0 * (d as f64).ln())).min(1.0))
            })
        })
        .collect()
}

#[test]
fn threshold_fit_recovers_the_constructed_log_law() {
    let fit = threshold_fit(&log_law_cells(), &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
    assert!(fit.unfittable.is_empty(), "{:?}", fit.unfittable);
    for &d in &DS {
        let v = fit.value(d, 0.5).unwrap();
        assert!((v - (d as f64).ln()).abs() < 1e-12, "d = {d}: {v}");
    }
    let l = fit.line(0.5).unwrap();
    assert!((l.slope - 1.0).abs() <= 0.02 && l.r2 > 0.9999, "{l:?}");
    // δ⋆(d, t) = 2t·ln d exactly
    for l in &fit.lines {
        assert!(
            (l.slope - 2.0 * l.target).abs() < 1e-9 && l.intercept.abs() < 1e-9,
            "{l:?}"
        );
    }
}

#[test]
fn time_fit_recovers_a_log_d_step_count() {
    // reaches 0.5 at T⋆ = 50 ln d and keeps rising linearly
    let curves: Vec<CurvePoint> = DS
        .iter()
        .flat_map(|&d| {
            let t_star = 50.0 * (d as f64).ln();
            (0..=100).map(move |k| curve(d, 10 * k, (0.5 * (10 * k) as f64 / t_star).min(1.0)))
        })
        .collect();
    let fit = time_fit(&curves, &[0.5]).unwrap();
    assert_eq!(fit.kind, FitKind::Time);
    let l = fit.line(0.5).unwrap();
    assert!((l.slope - 50.0).abs() <= 1.0, "{l:?}");
    assert!(l.r2 > 0.999);
}

#[test]
fn unbracketed_targets_are_listed() {
    let mut cells = log_law_cells();
    // d = 64 never reaches 0.5 on a truncated grid
    cells.retain(|c| c.d != 64 || c.delta < 3.0);
    // d = 1024 starts above 0.1
    cells.retain(|c| c.d != 1024 || c.delta >= 2.0);
    let fit = threshold_fit(&cells, &[0.1, 0.5]).unwrap();
    let listed: Vec<(f64, Option<usize>)> = fit.unfittable.iter().map(|u| (u.target, u.d)).collect();
    assert!(listed.contains(&(0.5, Some(64))), "{listed:?}");
    assert!(listed.contains(&(0.1, Some(1024))), "{listed:?}");
    assert_eq!(fit.line(0.1).unwrap().points, 4);
    assert_eq!(fit.line(0.5).unwrap().points, 4);

    let single: Vec<CellSummary> = log_law_cells().into_iter().filter(|c| c.d == 128).collect();
    let fit = threshold_fit(&single, &[0.3]).unwrap();
    assert!(fit.lines.is_empty());
    assert_eq!(fit.unfittable.len(), 1);
    assert_eq!(fit.unfittable[0].d, None);
}

#[test]
fn mixed_sweeps_and_bad_targets_are_rejected() {
    let mut cells = log_law_cells();
    cells[3].m = 8.0;
    assert!(threshold_fit(&cells, &[0.3]).is_err());
    assert!(threshold_fit(&[], &[0.3]).is_err());
    assert!(threshold_fit(&log_law_cells(), &[]).is_err());
    let mut curves = vec![curve(64, 0, 0.0), curve(64, 10, 1.0)];
    curves[1].delta = 5.0;
    assert!(time_fit(&curves, &[0.5]).is_err());
}

#[test]
fn fit_files_carry_the_frozen_headers() {
    let dir = tempfile::tempdir().unwrap();
    let fit = threshold_fit(&log_law_cells(), &[0.1, 0.3]).unwrap();
    let (p, l) = fit_file_names(FitKind::Threshold);
    write_fit(&dir.path().join(&p), &dir.path().join(&l), &fit).unwrap();
    let points = std::fs::read_to_string(dir.path().join(p)).unwrap();
    let lines = std::fs::read_to_string(dir.path().join(l)).unwrap();
    assert_eq!(points.lines().next().unwrap(), FIT_POINTS_HEADER.join(","));
    assert_eq!(lines.lines().next().unwrap(), FIT_LINES_HEADER.join(","));
    assert_eq!(points.lines().count(), 1 + 2 * DS.len());
    assert_eq!(lines.lines().count(), 3);
    assert!(lines.lines().nth(1).unwrap().starts_with("threshold,0.1,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thresholds_increase_with_the_target(
        noise in prop::collection::vec(-0.08f64..0.08, 5 * 24),
        targets in prop::collection::vec(0.05f64..0.95, 1..6),
    ) {
        let cells: Vec<CellSummary> = DS
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| {
                let noise = &noise;
                (0..24).map(move |k| {
                    let delta = 0.5 * (k + 1) as f64;
                    let v = (delta / (1.5 * (d as f64).ln())).min(1.0) + noise[24 * i + k];
                    cell(d, delta, v.clamp(0.0, 1.0))
                })
            })
            .collect();
        let fit = threshold_fit(&cells, &targets).unwrap();
        prop_assert!(fit.non_monotone.is_empty());
        for &d in &DS {
            let v: Vec<f64> = fit.points.iter().filter(|p| p.d == d).map(|p| p.value).collect();
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]), "d = {}: {:?}", d, v);
        }
        // every (target, d) pair is either fitted or listed
        let mut uniq = targets.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        let listed = fit.unfittable.iter().filter(|u| u.d.is_some()).count();
        prop_assert_eq!(fit.points.len() + listed, uniq.len() * DS.len());
    }

    #[test]
    fn isotonic_fit_is_monotone_and_preserves_the_mean(y in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let f = isotonic_increasing(&y);
        prop_assert_eq!(f.len(), y.len());
        prop_assert!(f.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let (a, b): (f64, f64) = (y.iter().sum(), f.iter().sum());
        prop_assert!((a - b).abs() <= 1e-9);
    }
}
