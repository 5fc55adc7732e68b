use super::eigen::{top2_eigs, SpectralReport, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use super::operator::{SpikedOperator, WeightedGram};
use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::linalg::dot;
use crate::optim::Trajectory;
use crate::rng::hash_words;

/// Fraction of samples with ⟨x_i, θ⟩² > M.
pub fn indicator_mass(inst: &Instance, theta: &[f64], m: f64) -> Result<f64> {
    if theta.len() != inst.d() {
        return domain("parameter has the wrong dimension");
    }
    let x = inst.x();
    let count = (0..inst.n())
        .filter(|&i| {
            let u = dot(x.row(i), theta);
            u * u > m
        })
        .count();
    Ok(count as f64 / inst.n() as f64)
}

const PROBE_SEED: u64 = 0x9E6D_55A1;

pub const AUDIT_MIN_GAP: f64 = 0.5;
pub const AUDIT_MIN_OVERLAP: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct AuditPoint {
    pub t: usize,
    pub report: SpectralReport,
    /// gap < 0.5 or overlap < 0.5.
    pub flagged: bool,
}

/// Spectrum of A(θ_t) at every `stride`-th recorded iterate and at the
/// terminal point. Trajectories recorded without iterates, or with fewer than
/// `stride` records, are audited at the terminal point only.
pub fn trajectory_spectral_audit(inst: &Instance, traj: &Trajectory, stride: usize) -> Result<Vec<AuditPoint>> {
    if stride == 0 {
        return domain("stride must be positive");
    }
    let mut points: Vec<(usize, &[f64])> = Vec::new();
    if let Some(iterates) = &traj.iterates {
        if stride < iterates.len() {
            for (k, theta) in iterates.iter().enumerate().step_by(stride) {
                points.push((traj.steps[k].t, theta));
            }
        }
    }
    let t_end = traj.last().t;
    if points.last().is_none_or(|&(t, _)| t != t_end) {
        points.push((t_end, &traj.theta));
    }
    points
        .into_iter()
        .map(|(t, theta)| {
            let op = SpikedOperator::a_theta(inst, theta)?;
            let report = top2_eigs(
                &op,
                DEFAULT_TOL,
                DEFAULT_MAX_ITERS,
                hash_words(&[inst.seed().root(), t as u64]),
            )?;
            let flagged = report.gap() < AUDIT_MIN_GAP || report.overlap.unwrap_or(0.0) < AUDIT_MIN_OVERLAP;
            Ok(AuditPoint { t, report, flagged })
        })
        .collect()
}

/// Estimate of λ_max(A(θ) − A⋆): the largest Lanczos Ritz value over `probes`
/// independent random starts. A(θ) ⪯ A⋆ makes this ≤ 0 up to round-off.
pub fn psd_ordering_check(inst: &Instance, theta: &[f64], probes: usize) -> Result<f64> {
    if probes == 0 {
        return domain("at least one probe is required");
    }
    let a_theta = SpikedOperator::a_theta(inst, theta)?;
    let a_star = SpikedOperator::a_star(inst);
    let diff: Vec<f64> = a_theta
        .gram()
        .weights()
        .iter()
        .zip(a_star.gram().weights())
        .map(|(a, b)| a - b)
        .collect();
    let op = WeightedGram::new(inst.x(), diff)?;
    let mut best = f64::NEG_INFINITY;
    for k in 0..probes {
        let r = top2_eigs(&op, DEFAULT_TOL, DEFAULT_MAX_ITERS, hash_words(&[PROBE_SEED, k as u64]))?;
        best = best.max(r.lambda1);
    }
    Ok(best)
}
