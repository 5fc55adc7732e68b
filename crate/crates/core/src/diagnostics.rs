//! Trajectory measurements for Euclidean GD from small initialization:
//! angles, first-passage times, geometric rate fits, one-point convexity,
//! Jacobian Gram deviations and the Stein coefficient bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::activation::{Activation, ActivationKind};
use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::linalg::{dot, norm, normalize, project_out};
use crate::losses::{grad_squared, stein_decomposition, DEFAULT_QUAD_ORDER};
use crate::optim::{StepRecord, Trajectory};
use crate::rng::SeedStream;

/// Sign-folded angle arccos(|⟨θ, θ⋆⟩|/(‖θ‖‖θ⋆‖)) in [0, π/2].
pub fn angle(theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    if theta.len() != theta_star.len() {
        return domain("vectors differ in length");
    }
    let r = norm(theta) * norm(theta_star);
    if r == 0.0 {
        return domain("angle with a zero vector is undefined");
    }
    Ok((dot(theta, theta_star).abs() / r).min(1.0).acos())
}

/// 3 ln d / ln(1 + 1.99η).
pub fn predicted_angle_time(d: usize, eta: f64) -> f64 {
    3.0 * (d as f64).ln() / (1.0 + 1.99 * eta).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTimes {
    /// First recorded step with angle ≤ the target.
    pub t_angle: Option<usize>,
    /// First recorded step with ‖θ‖ ≥ 1/4.
    pub t_norm: Option<usize>,
    /// First recorded step with min ‖θ ∓ θ⋆‖² ≤ ε.
    pub t_dist: Option<usize>,
    pub predicted_t_angle: f64,
}

pub const NORM_THRESHOLD: f64 = 0.25;

fn first(steps: &[StepRecord], pred: impl Fn(&StepRecord) -> bool) -> Option<usize> {
    steps.iter().find(|s| pred(s)).map(|s| s.t)
}

pub fn phase_times(traj: &Trajectory, d: usize, eta: f64, phi_target: f64, eps: f64) -> PhaseTimes {
    PhaseTimes {
        t_angle: first(&traj.steps, |s| s.angle <= phi_target),
        t_norm: first(&traj.steps, |s| s.norm >= NORM_THRESHOLD),
        t_dist: first(&traj.steps, |s| s.dist_sq <= eps),
        predicted_t_angle: predicted_angle_time(d, eta),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    /// (1 − e^{slope})/η.
    pub alpha: f64,
    /// Slope of ln dist² against t.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// First and last step of the fitted window.
    pub window: (usize, usize),
    pub points: usize,
}

pub const RATE_FIT_MIN_POINTS: usize = 20;
pub const RATE_FIT_FLOOR: f64 = 1e-14;
pub const RATE_FIT_CEIL: f64 = 1e-2;

/// Ordinary least squares y = slope·x + intercept; returns (slope, intercept, r²).
/// A constant response is fitted exactly and reports r² = 1.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Rate fit on explicit (t, dist²) pairs: keep points with dist² in
/// (1e-14, 1e-2), then regress on the last `tail_fraction` of them.
pub fn geometric_rate_fit_points(t: &[usize], dist_sq: &[f64], tail_fraction: f64, eta: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return domain(format!("tail fraction must lie in (0, 1], got {tail_fraction}"));
    }
    if !(eta > 0.0) {
        return domain("step size must be positive");
    }
    let valid: Vec<(usize, f64)> = t
        .iter()
        .zip(dist_sq)
        .filter(|(_, &q)| q > RATE_FIT_FLOOR && q < RATE_FIT_CEIL)
        .map(|(&a, &b)| (a, b))
        .collect();
    let take = ((valid.len() as f64 * tail_fraction).ceil() as usize).min(valid.len());
    let window = &valid[valid.len() - take..];
    if window.len() < RATE_FIT_MIN_POINTS {
        return domain(format!(
            "rate fit needs at least {RATE_FIT_MIN_POINTS} tail points with distance² in \
             ({RATE_FIT_FLOOR:e}, {RATE_FIT_CEIL:e}), found {}",
            window.len()
        ));
    }
    let xs: Vec<f64> = window.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(RateFit {
        alpha: (1.0 - slope.exp()) / eta,
        slope,
        intercept,
        r2,
        window: (window[0].0, window[window.len() - 1].0),
        points: window.len(),
    })
}

pub fn geometric_rate_fit(traj: &Trajectory, tail_fraction: f64, eta: f64) -> Result<RateFit> {
    let t: Vec<usize> = traj.steps.iter().map(|s| s.t).collect();
    let q: Vec<f64> = traj.steps.iter().map(|s| s.dist_sq).collect();
    geometric_rate_fit_points(&t, &q, tail_fraction, eta)
}

/// ⟨Ĝ(θ), θ − θ⋆⟩/‖θ − θ⋆‖², against whichever of ±θ⋆ is nearer.
pub fn one_point_convexity(inst: &Instance, theta: &[f64]) -> Result<f64> {
    if theta.len() != inst.d() {
        return domain("parameter has the wrong dimension");
    }
    let ts = inst.theta_star();
    let target: Vec<f64> = if dot(theta, ts) >= 0.0 {
        ts.to_vec()
    } else {
        ts.iter().map(|v| -v).collect()
    };
    let diff: Vec<f64> = theta.iter().zip(&target).map(|(a, b)| a - b).collect();
    let r2 = dot(&diff, &diff);
    if r2 == 0.0 {
        return domain("one-point convexity is undefined at ±θ⋆");
    }
    let g = grad_squared(inst, theta)?;
    Ok(dot(&g.euclidean, &diff) / r2)
}

pub const GRAM_MAX_DIM: usize = 300;
pub const GRAM_MIN_SAMPLES: usize = 100_000;
const GRAM_BATCHES: usize = 10;
const GRAM_CHUNK: usize = 4096;

/// Ĥ(θ, θ̃) = (1/n) Σ σ'(⟨x_i,θ⟩) σ'(⟨x_i,θ̃⟩) x_i x_iᵀ, dense.
pub fn gram_hat(inst: &Instance, theta: &[f64], theta_tilde: &[f64]) -> Result<DMatrix<f64>> {
    let d = inst.d();
    if d > GRAM_MAX_DIM {
        return domain(format!("dense Gram matrix supports d ≤ {GRAM_MAX_DIM}, got {d}"));
    }
    if theta.len() != d || theta_tilde.len() != d {
        return domain("parameters have the wrong dimension");
    }
    let act = inst.activation();
    let x = inst.x();
    let rows: Vec<(f64, &[f64])> = (0..inst.n())
        .map(|i| {
            let r = x.row(i);
            (act.derivative(dot(r, theta)) * act.derivative(dot(r, theta_tilde)), r)
        })
        .collect();
    let mut h = weighted_outer_sum(d, rows.iter().map(|(w, r)| (*w, *r)));
    h /= inst.n() as f64;
    Ok(h)
}

/// Σ w_i r_i r_iᵀ via chunked matrix products; the sign of w is kept by
/// splitting into positive and negative parts.
fn weighted_outer_sum<'a>(d: usize, rows: impl Iterator<Item = (f64, &'a [f64])>) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::zeros(d, d);
    let mut pos: Vec<f64> = Vec::with_capacity(GRAM_CHUNK * d);
    let mut neg: Vec<f64> = Vec::with_capacity(GRAM_CHUNK * d);
    let flush = |buf: &mut Vec<f64>, acc: &mut DMatrix<f64>, sign: f64| {
        if buf.is_empty() {
            return;
        }
        let m = DMatrix::from_row_slice(buf.len() / d, d, buf);
        *acc += m.tr_mul(&m) * sign;
        buf.clear();
    };
    for (w, r) in rows {
        if w == 0.0 {
            continue;
        }
        let s = w.abs().sqrt();
        let buf = if w > 0.0 { &mut pos } else { &mut neg };
        buf.extend(r.iter().map(|v| v * s));
        if buf.len() >= GRAM_CHUNK * d {
            if w > 0.0 {
                flush(&mut pos, &mut acc, 1.0);
            } else {
                flush(&mut neg, &mut acc, -1.0);
            }
        }
    }
    flush(&mut pos, &mut acc, 1.0);
    flush(&mut neg, &mut acc, -1.0);
    acc
}

/// Monte-Carlo estimate of H(θ, θ̃) = E[σ'(⟨x,θ⟩) σ'(⟨x,θ̃⟩) x xᵀ] from `m`
/// fresh samples, returned as per-batch means (equal batch sizes).
fn gram_population_batches(
    act: &Activation,
    theta: &[f64],
    theta_tilde: &[f64],
    m: usize,
    seed: &SeedStream,
) -> Vec<DMatrix<f64>> {
    let d = theta.len();
    let per = m / GRAM_BATCHES;
    (0..GRAM_BATCHES)
        .map(|b| {
            let mut rng = seed.purpose("gram_mc").row_rng(b as u64);
            let samples: Vec<(f64, Vec<f64>)> = (0..per)
                .map(|_| {
                    let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let w = act.derivative(dot(&x, theta)) * act.derivative(dot(&x, theta_tilde));
                    (w, x)
                })
                .collect();
            let mut h = weighted_outer_sum(d, samples.iter().map(|(w, x)| (*w, x.as_slice())));
            h /= per as f64;
            h
        })
        .collect()
}

/// Mean and elementwise standard error of the Monte-Carlo estimate of H.
pub fn gram_population_mc(
    act: &Activation,
    theta: &[f64],
    theta_tilde: &[f64],
    m: usize,
    seed: &SeedStream,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_gram_args(theta, theta_tilde, m)?;
    let batches = gram_population_batches(act, theta, theta_tilde, m, seed);
    Ok(batch_mean_se(&batches))
}

fn batch_mean_se(batches: &[DMatrix<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = batches.len() as f64;
    let mut mean = batches[0].clone() * 0.0;
    for b in batches {
        mean += b;
    }
    mean /= k;
    let mut var = mean.clone() * 0.0;
    for b in batches {
        let diff = b - &mean;
        var += diff.component_mul(&diff);
    }
    var /= k * (k - 1.0);
    (mean, var.map(f64::sqrt))
}

fn check_gram_args(theta: &[f64], theta_tilde: &[f64], m: usize) -> Result<()> {
    if theta.len() > GRAM_MAX_DIM {
        return domain(format!("dense Gram matrix supports d ≤ {GRAM_MAX_DIM}"));
    }
    if theta.len() != theta_tilde.len() {
        return domain("parameters differ in length");
    }
    if m < GRAM_MIN_SAMPLES {
        return domain(format!(
            "at least {GRAM_MIN_SAMPLES} Monte-Carlo samples are required, got {m}"
        ));
    }
    Ok(())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramDeviation {
    /// ‖Ĥ − H‖ with H replaced by its Monte-Carlo estimate.
    pub deviation: f64,
    /// Batch-means standard error of `deviation`.
    pub std_err: f64,
}

pub fn gram_deviation(
    inst: &Instance,
    theta: &[f64],
    theta_tilde: &[f64],
    m: usize,
    seed: &SeedStream,
) -> Result<GramDeviation> {
    check_gram_args(theta, theta_tilde, m)?;
    let h_hat = gram_hat(inst, theta, theta_tilde)?;
    let batches = gram_population_batches(inst.activation(), theta, theta_tilde, m, seed);
    let (mean, _) = batch_mean_se(&batches);
    let deviation = spectral_norm(&(&h_hat - &mean));
    let per_batch: Vec<f64> = batches.iter().map(|b| spectral_norm(&(&h_hat - b))).collect();
    let k = per_batch.len() as f64;
    let mu = per_batch.iter().sum::<f64>() / k;
    let var = per_batch.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (k - 1.0);
    Ok(GramDeviation {
        deviation,
        std_err: (var / k).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteinBoundsReport {
    pub a: f64,
    pub b: f64,
    /// 4M + 4.
    pub a_bound: f64,
    pub b_lower: f64,
    /// MC estimate of E[⟨g,u⟩² 1{sign⟨g,a⟩ ≠ sign⟨g,b⟩}] with a = θ/‖θ‖, b = θ⋆.
    pub disagreement: f64,
    pub disagreement_se: f64,
    /// (2/π)·∠(a, b).
    pub disagreement_bound: f64,
    pub violations: Vec<String>,
}

/// 4‖θ‖(cos φ − √3·√(2(‖θ‖/√M)e^{−M/(2‖θ‖²)} + 2e^{−M/2})).
pub fn stein_b_lower_bound(theta_norm: f64, phi: f64, m: f64) -> f64 {
    let r = theta_norm;
    let inner = 2.0 * (r / m.sqrt()) * (-m / (2.0 * r * r)).exp() + 2.0 * (-m / 2.0).exp();
    4.0 * r * (phi.cos() - 3f64.sqrt() * inner.sqrt())
}

/// Checks the Stein coefficient bounds for hard truncation and estimates the
/// sign-disagreement moment along `u` (defaults to θ/‖θ‖) with `mc_samples`
/// draws. Violations are listed, not raised.
pub fn stein_bounds_check(
    theta: &[f64],
    theta_star: &[f64],
    act: &Activation,
    u: Option<&[f64]>,
    mc_samples: usize,
    seed: &SeedStream,
) -> Result<SteinBoundsReport> {
    if act.kind() != ActivationKind::HardTrunc {
        return domain("Stein bounds are stated for hard truncation");
    }
    if mc_samples < 2 {
        return domain("at least two Monte-Carlo samples are required");
    }
    let r = norm(theta);
    if r == 0.0 {
        return domain("θ must be non-zero");
    }
    let (a, b) = stein_decomposition(theta, theta_star, act, DEFAULT_QUAD_ORDER)?;
    let m = act.m();
    let cos_phi = (dot(theta, theta_star) / (r * norm(theta_star))).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    let a_bound = 4.0 * m + 4.0;
    let b_lower = stein_b_lower_bound(r, phi, m);

    let dir_a: Vec<f64> = theta.iter().map(|v| v / r).collect();
    let dir_u: Vec<f64> = match u {
        Some(u) => {
            if u.len() != theta.len() {
                return domain("u has the wrong dimension");
            }
            let mut v = u.to_vec();
            if normalize(&mut v) == 0.0 {
                return domain("u must be non-zero");
            }
            v
        }
        None => dir_a.clone(),
    };
    // ⟨g,a⟩, ⟨g,b⟩, ⟨g,u⟩ only depend on g's projection onto span{a, b, u}
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in [&dir_a, &theta_star.to_vec(), &dir_u] {
        let mut w = v.clone();
        for e in &basis {
            project_out(&mut w, e);
        }
        if normalize(&mut w) > 1e-12 {
            basis.push(w);
        }
    }
    let coords = |v: &[f64]| -> Vec<f64> { basis.iter().map(|e| dot(v, e)).collect() };
    let (ca, cb, cu) = (coords(&dir_a), coords(theta_star), coords(&dir_u));
    let mut rng = seed.purpose("stein_mc").rng();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut g = vec![0.0; basis.len()];
    for _ in 0..mc_samples {
        g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let ga = dot(&g, &ca);
        let gb = dot(&g, &cb);
        let val = if (ga > 0.0) != (gb > 0.0) {
            let gu = dot(&g, &cu);
            gu * gu
        } else {
            0.0
        };
        sum += val;
        sum_sq += val * val;
    }
    let k = mc_samples as f64;
    let mean = sum / k;
    let var = (sum_sq / k - mean * mean).max(0.0) * k / (k - 1.0);
    let se = (var / k).sqrt();
    let angle_ab = (dot(&dir_a, theta_star) / norm(theta_star)).clamp(-1.0, 1.0).acos();
    let bound = 2.0 / PI * angle_ab;

    let mut violations = Vec::new();
    if a.abs() > a_bound {
        violations.push(format!("|A| = {} exceeds 4M + 4 = {a_bound}", a.abs()));
    }
    if b < b_lower {
        violations.push(format!("B = {b} is below the lower bound {b_lower}"));
    }
    if mean > bound + 3.0 * se {
        violations.push(format!(
            "sign-disagreement moment {mean} exceeds (2/π)∠ + 3se = {}",
            bound + 3.0 * se
        ));
    }
    Ok(SteinBoundsReport {
        a,
        b,
        a_bound,
        b_lower,
        disagreement: mean,
        disagreement_se: se,
        disagreement_bound: bound,
        violations,
    })
}
