//! Rank-one fixed-point description of the top eigenpair of Σ y_i x_i x_iᵀ.
//!
//! With θ⋆ = e₁ write Σ y_i x_i x_iᵀ = [[a, qᵀ], [q, P]] and
//! L(μ) = λ1(P + μ q qᵀ). The top eigenvalue equals L(μ⋆) at the fixed point
//! μ⋆ = 1/(L(μ⋆) − a), and the squared overlap of its eigenvector with e₁ lies
//! between L'₋/(L'₋ + μ⋆⁻²) and L'₊/(L'₊ + μ⋆⁻²).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{domain, Error, Result};
use crate::instance::Instance;

pub const ORACLE_MAX_DIM: usize = 300;

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneOracle {
    /// Bracket on ⟨v1, θ⋆⟩².
    pub sq_overlap_bounds: (f64, f64),
    /// λ1 of A⋆ = (2/n) Σ y_i x_i x_iᵀ, i.e. 2L(μ⋆)/n.
    pub lambda1: f64,
    pub mu_star: f64,
    pub bisection_steps: usize,
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

pub fn rank_one_overlap_oracle(inst: &Instance) -> Result<RankOneOracle> {
    let d = inst.d();
    if d > ORACLE_MAX_DIM {
        return domain(format!("dense oracle supports d ≤ {ORACLE_MAX_DIM}, got {d}"));
    }
    let ts = inst.theta_star();
    if ts[0] != 1.0 || ts[1..].iter().any(|&v| v != 0.0) {
        return domain("rank-one oracle needs θ⋆ = e₁");
    }
    let x = inst.x();
    let mut s = DMatrix::<f64>::zeros(d, d);
    for i in 0..inst.n() {
        let r = DVector::from_column_slice(x.row(i));
        s.ger(inst.y()[i], &r, &r, 1.0);
    }
    let a = s[(0, 0)];
    let q: DVector<f64> = s.view((1, 0), (d - 1, 1)).column(0).into_owned();
    let p: DMatrix<f64> = s.view((1, 1), (d - 1, d - 1)).into_owned();
    let big_l = |mu: f64| -> f64 {
        let mut m = p.clone();
        m.ger(mu, &q, &q, 1.0);
        lambda_max(&m)
    };
    let g = |mu: f64| mu * (big_l(mu) - a) - 1.0;

    // g(0⁺) = −1, and g grows like μ²‖q‖² for large μ
    let mut hi = 1.0;
    let mut steps = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > 200 || !hi.is_finite() {
            return Err(Error::NoBracket(format!(
                "fixed point μ = 1/(L(μ) − a) not bracketed (a = {a}, ‖q‖ = {})",
                q.norm()
            )));
        }
    }
    let mut lo = 0.0;
    let mut iters = 0;
    while hi - lo > 1e-15 * hi && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    let mu = 0.5 * (lo + hi);
    let l_mu = big_l(mu);
    let h = 1e-6 * mu.max(1.0);
    let left = (l_mu - big_l(mu - h)) / h;
    let right = (big_l(mu + h) - l_mu) / h;
    let inv2 = 1.0 / (mu * mu);
    let b_left = left / (left + inv2);
    let b_right = right / (right + inv2);
    Ok(RankOneOracle {
        sq_overlap_bounds: (b_left.min(b_right), b_left.max(b_right)),
        lambda1: 2.0 * l_mu / inst.n() as f64,
        mu_star: mu,
        bisection_steps: iters + steps,
    })
}
