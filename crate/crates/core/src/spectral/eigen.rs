//! Top-two eigenpairs by Lanczos with full reorthogonalization.

use rand::Rng;
use rand_distr::StandardNormal;

use super::operator::SymmetricOperator;
use crate::error::{domain, Error, Result};
use crate::linalg::{axpy, dot, norm, normalize};
use crate::rng::SeedStream;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Largest Krylov basis kept before an explicit restart.
const MAX_BASIS: usize = 600;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub lambda1: f64,
    pub lambda2: f64,
    pub sq_overlap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// |⟨v1, θ⋆⟩| when the operator carries a reference direction.
    pub overlap: Option<f64>,
    /// ‖A v_k − λ_k v_k‖ for k = 1, 2.
    pub residuals: [f64; 2],
    /// Operator applications used.
    pub iterations: usize,
    pub predicted: Option<Prediction>,
}

impl SpectralReport {
    pub fn gap(&self) -> f64 {
        self.lambda1 - self.lambda2
    }

    pub fn sq_overlap(&self) -> Option<f64> {
        self.overlap.map(|o| o * o)
    }

    /// measured − predicted for (λ1, λ2, overlap²).
    pub fn prediction_gaps(&self) -> Option<(f64, f64, f64)> {
        let p = self.predicted.as_ref()?;
        Some((
            self.lambda1 - p.lambda1,
            self.lambda2 - p.lambda2,
            self.sq_overlap()? - p.sq_overlap,
        ))
    }

    pub fn with_prediction(mut self, p: Prediction) -> Self {
        self.predicted = Some(p);
        self
    }
}

/// |⟨v, θ⋆⟩|/‖v‖.
pub fn overlap(v: &[f64], theta_star: &[f64]) -> Result<f64> {
    if v.len() != theta_star.len() {
        return domain("vectors differ in length");
    }
    let r = norm(v);
    if r == 0.0 {
        return domain("overlap of the zero vector is undefined");
    }
    Ok((dot(v, theta_star).abs() / (r * norm(theta_star))).min(1.0))
}

fn random_unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) > 0.0 {
            return v;
        }
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram–Schmidt keep the basis orthogonal to round-off
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            axpy(-c, b, w);
        }
    }
}

struct Ritz {
    values: [f64; 2],
    coords: [Vec<f64>; 2],
    estimates: [f64; 2],
}

fn ritz_top2(alpha: &[f64], beta: &[f64], last_beta: f64) -> Ritz {
    let k = alpha.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pick = |slot: usize| -> (f64, Vec<f64>) {
        match order.get(slot) {
            Some(&j) => (eig.eigenvalues[j], eig.eigenvectors.column(j).iter().copied().collect()),
            None => (f64::NEG_INFINITY, vec![0.0; k]),
        }
    };
    let (l1, s1) = pick(0);
    let (l2, s2) = pick(1);
    let est = |s: &Vec<f64>| (last_beta * s[k - 1]).abs();
    Ritz {
        values: [l1, l2],
        estimates: [est(&s1), est(&s2)],
        coords: [s1, s2],
    }
}

fn combine(basis: &[Vec<f64>], coords: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; basis[0].len()];
    for (b, &c) in basis.iter().zip(coords) {
        axpy(c, b, &mut v);
    }
    normalize(&mut v);
    v
}

/// Largest two eigenpairs of `op`. Converged when the Ritz residual estimates
/// of both pairs are at most `tol·max(1, |λ1|)`; `max_iters` bounds operator
/// applications. Deterministic for a given `seed`.
pub fn top2_eigs<O: SymmetricOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let d = op.dim();
    if d < 2 {
        return domain("top-two eigenpairs need dimension at least 2");
    }
    let mut rng = SeedStream::new(seed).purpose("lanczos").rng();
    let cap = d.min(MAX_BASIS);
    let mut start = random_unit(d, &mut rng);
    let mut applies = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut w = vec![0.0; d];

    loop {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut next_check = 4usize;
        loop {
            let j = basis.len() - 1;
            op.apply_into(&basis[j], &mut w);
            applies += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            orthogonalize(&mut w, &basis);
            let b = norm(&w);
            let k = basis.len();
            let scale = alpha
                .iter()
                .map(|x| x.abs())
                .fold(0.0, f64::max)
                .max(beta.iter().copied().fold(0.0, f64::max));
            let invariant = b <= 1e-12 * scale.max(f64::MIN_POSITIVE);
            let exhausted = k == d;
            let out_of_budget = applies >= max_iters;
            let at_cap = k >= cap;
            if k >= 2 && (k >= next_check || invariant || exhausted || out_of_budget || at_cap) {
                next_check = k + (k / 6).max(4);
                let last_beta = if invariant || exhausted { 0.0 } else { b };
                let ritz = ritz_top2(&alpha, &beta, last_beta);
                let thresh = tol * ritz.values[0].abs().max(1.0);
                best_residual = best_residual.min(ritz.estimates[0].max(ritz.estimates[1]));
                if (ritz.estimates[0] <= thresh && ritz.estimates[1] <= thresh) || exhausted {
                    return Ok(finish(op, &basis, ritz, applies));
                }
                if out_of_budget {
                    return Err(Error::NoConvergence {
                        iterations: applies,
                        residual: best_residual,
                    });
                }
                if at_cap {
                    // explicit restart from the current best pair
                    let v1 = combine(&basis, &ritz.coords[0]);
                    let v2 = combine(&basis, &ritz.coords[1]);
                    start = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
                    normalize(&mut start);
                    break;
                }
            } else if out_of_budget {
                return Err(Error::NoConvergence {
                    iterations: applies,
                    residual: best_residual,
                });
            }
            if invariant {
                // Krylov space is invariant: continue with a fresh direction
                let mut fresh = random_unit(d, &mut rng);
                orthogonalize(&mut fresh, &basis);
                normalize(&mut fresh);
                beta.push(0.0);
                basis.push(fresh);
            } else {
                beta.push(b);
                let v: Vec<f64> = w.iter().map(|x| x / b).collect();
                basis.push(v);
            }
        }
    }
}

fn finish<O: SymmetricOperator + ?Sized>(op: &O, basis: &[Vec<f64>], ritz: Ritz, applies: usize) -> SpectralReport {
    let k = ritz.coords[0].len();
    let v1 = combine(&basis[..k], &ritz.coords[0]);
    let v2 = combine(&basis[..k], &ritz.coords[1]);
    let residual = |v: &[f64], l: f64| {
        let mut av = vec![0.0; v.len()];
        op.apply_into(v, &mut av);
        axpy(-l, v, &mut av);
        norm(&av)
    };
    let residuals = [residual(&v1, ritz.values[0]), residual(&v2, ritz.values[1])];
    let overlap = op.reference().map(|r| (dot(&v1, r).abs() / norm(r)).min(1.0));
    SpectralReport {
        lambda1: ritz.values[0],
        lambda2: ritz.values[1],
        v1,
        v2,
        overlap,
        residuals,
        iterations: applies + 2,
        predicted: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::operator::DiagonalOperator;

    #[test]
    fn diagonal_operator() {
        let mut diag = vec![1.0; 30];
        diag[0] = 3.0;
        let r = top2_eigs(&DiagonalOperator(diag), 1e-10, 1000, 1).unwrap();
        assert!((r.lambda1 - 3.0).abs() < 1e-12);
        assert!((r.lambda2 - 1.0).abs() < 1e-12);
        assert!((r.v1[0].abs() - 1.0).abs() < 1e-12);
        assert!(r.residuals[0] < 1e-10 && r.residuals[1] < 1e-10);
    }

    #[test]
    fn zero_operator_and_bad_arguments() {
        let r = top2_eigs(&DiagonalOperator(vec![0.0; 5]), 1e-10, 100, 3).unwrap();
        assert_eq!(r.lambda1, 0.0);
        assert_eq!(r.lambda2, 0.0);
        assert!(top2_eigs(&DiagonalOperator(vec![1.0; 5]), 0.0, 100, 3).is_err());
        assert!(top2_eigs(&DiagonalOperator(vec![1.0]), 1e-9, 100, 3).is_err());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let diag: Vec<f64> = (0..500).map(|i| 1.0 + 1e-6 * i as f64).collect();
        match top2_eigs(&DiagonalOperator(diag), 1e-14, 5, 2) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert!(residual.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn overlap_basic_cases() {
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(overlap(&e1, &e1).unwrap(), 1.0);
        assert_eq!(overlap(&[0.0, 2.0, 0.0], &e1).unwrap(), 0.0);
        let s = 0.5f64.sqrt();
        assert!((overlap(&[s, s, 0.0], &e1).unwrap() - s).abs() < 1e-12);
        assert!(overlap(&[0.0; 3], &e1).is_err());
    }
}
