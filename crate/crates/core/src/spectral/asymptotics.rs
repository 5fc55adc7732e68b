//! Proportional-limit fixed points for D_n = (1/n) Σ y_i x_i x_iᵀ with
//! Y = σ(X), X ~ N(0, 1), and δ = n/d:
//!
//! * f(λ) = E[Y(X² − 1)/(λ − Y)], whose largest root of f = 1/δ is λ⋆;
//! * ψ(λ) = λ(1/δ + E[Y/(λ − Y)]), with λ̄ the root of ψ' = 0 above sup Y;
//! * φ(λ) = λ E[Y X²/(λ − Y)].
//!
//! Predicted λ1 = ψ(λ⋆), λ2 = ψ(λ̄) and ⟨v1, θ⋆⟩² = ψ'(λ⋆)/(ψ'(λ⋆) − φ'(λ⋆)).

use crate::activation::{Activation, ActivationKind};
use crate::error::{domain, Error, Result};
use crate::quadrature::NormalQuadrature;

use super::eigen::Prediction;

/// Smallest admissible distance of λ above sup Y.
pub const POLE_MARGIN: f64 = 1e-9;
pub const BISECTION_TOL: f64 = 1e-10;
const QUAD_ORDER: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverDiagnostics {
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// |equation value| at the returned root.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticPrediction {
    pub delta: f64,
    pub m: f64,
    pub kind: ActivationKind,
    pub lambda_star: f64,
    pub lambda_bar: f64,
    /// For D_n; double the eigenvalues to predict A⋆.
    pub lambda1: f64,
    pub lambda2: f64,
    pub sq_overlap: f64,
    pub star: SolverDiagnostics,
    pub bar: SolverDiagnostics,
}

impl AsymptoticPrediction {
    /// The prediction for D_n (scale 1) or A⋆ (scale 2).
    pub fn scaled(&self, scale: f64) -> Prediction {
        Prediction {
            lambda1: scale * self.lambda1,
            lambda2: scale * self.lambda2,
            sq_overlap: self.sq_overlap,
        }
    }
}

/// The scalar functions above, for a fixed activation and δ.
#[derive(Clone, Debug)]
pub struct FixedPointEquations {
    act: Activation,
    delta: f64,
    tau: f64,
    quad: NormalQuadrature,
    kinks: Vec<f64>,
}

impl FixedPointEquations {
    pub fn new(act: &Activation, delta: f64) -> Result<Self> {
        if act.kind() == ActivationKind::Quadratic {
            return domain("fixed points need a bounded activation (hard_trunc or smooth_trunc)");
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return domain(format!("δ must be positive, got {delta}"));
        }
        Ok(Self {
            act: act.clone(),
            delta,
            tau: act.sup(),
            quad: NormalQuadrature::new(QUAD_ORDER)?,
            kinks: act.breakpoints(),
        })
    }

    /// sup Y.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn expect(&self, mut h: impl FnMut(f64, f64) -> f64) -> f64 {
        self.quad.expect(&self.kinks, |x| h(x, self.act.value(x)))
    }

    pub fn f(&self, lambda: f64) -> f64 {
        self.expect(|x, y| y * (x * x - 1.0) / (lambda - y))
    }

    pub fn psi(&self, lambda: f64) -> f64 {
        lambda * (1.0 / self.delta + self.expect(|_, y| y / (lambda - y)))
    }

    pub fn dpsi(&self, lambda: f64) -> f64 {
        1.0 / self.delta - self.expect(|_, y| y * y / ((lambda - y) * (lambda - y)))
    }

    pub fn phi(&self, lambda: f64) -> f64 {
        lambda * self.expect(|x, y| y * x * x / (lambda - y))
    }

    pub fn dphi(&self, lambda: f64) -> f64 {
        -self.expect(|x, y| y * y * x * x / ((lambda - y) * (lambda - y)))
    }
}

/// Bisection for a sign change of `g` on [lo, hi].
fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> (f64, usize) {
    let g_lo = g(lo);
    let mut iters = 0;
    while hi - lo > BISECTION_TOL && iters < 500 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    (0.5 * (lo + hi), iters)
}

pub fn asymptotic_fixed_points(act: &Activation, delta: f64) -> Result<AsymptoticPrediction> {
    let eq = FixedPointEquations::new(act, delta)?;
    let tau = eq.tau();

    // λ̄: ψ' → −∞ as λ → τ⁺ (Y has an atom at τ) and ψ' → 1/δ as λ → ∞.
    let bar_lo = tau + POLE_MARGIN;
    if eq.dpsi(bar_lo) >= 0.0 {
        return Err(Error::NoBracket(format!(
            "ψ' is already positive at sup Y + {POLE_MARGIN:e}"
        )));
    }
    let mut bar_hi = tau + 1.0;
    let mut grow = 0;
    while eq.dpsi(bar_hi) <= 0.0 {
        bar_hi = tau + 2.0 * (bar_hi - tau);
        grow += 1;
        if grow > 200 {
            return Err(Error::NoBracket("ψ' stays negative".into()));
        }
    }
    let (lambda_bar, it_bar) = bisect(bar_lo, bar_hi, |l| eq.dpsi(l));

    let star_lo = (3.0 * act.m()).max(lambda_bar);
    let star_hi = 10.0 * delta + 10.0 * act.m();
    let inv_delta = 1.0 / delta;
    let h = |l: f64| eq.f(l) - inv_delta;
    if !(star_lo < star_hi) || !(h(star_lo) > 0.0) || !(h(star_hi) < 0.0) {
        return Err(Error::NoBracket(format!(
            "f(λ) = 1/δ has no sign change on [{star_lo:.4}, {star_hi:.4}]; δ = {delta} is below \
             the solver's validity range"
        )));
    }
    let (lambda_star, it_star) = bisect(star_lo, star_hi, h);

    let dpsi_star = eq.dpsi(lambda_star);
    let dphi_star = eq.dphi(lambda_star);
    Ok(AsymptoticPrediction {
        delta,
        m: act.m(),
        kind: act.kind(),
        lambda_star,
        lambda_bar,
        lambda1: eq.psi(lambda_star),
        lambda2: eq.psi(lambda_bar),
        sq_overlap: dpsi_star / (dpsi_star - dphi_star),
        star: SolverDiagnostics {
            bracket: (star_lo, star_hi),
            iterations: it_star,
            residual: h(lambda_star).abs(),
        },
        bar: SolverDiagnostics {
            bracket: (bar_lo, bar_hi),
            iterations: it_bar,
            residual: eq.dpsi(lambda_bar).abs(),
        },
    })
}
