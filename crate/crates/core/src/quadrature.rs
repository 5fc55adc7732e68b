//! Gauss rules and Gaussian expectations.
//!
//! Expectations of the truncated activations have kinks (hard truncation) or
//! fast transitions (smooth truncation) at known points, where a single global
//! Gauss–Hermite rule converges slowly. [`NormalQuadrature`] instead splits
//! the real line at the caller's breakpoints, truncates the tails at
//! `±TAIL` standard deviations and applies Gauss–Legendre on each panel.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Tail cut in standard deviations; the discarded mass is below 1e-32.
pub const TAIL: f64 = 12.0;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on [-1, 1].
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("Gauss-Legendre order must be positive");
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_a^b f.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal weight: `E f(Z) ≈ Σ w_i f(x_i)`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' Hermite
    /// polynomials (zero diagonal, off-diagonal √k).
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("Gauss-Hermite order must be positive");
        }
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        // symmetrize to remove the solver's round-off asymmetry
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let j = n - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Fixed panel edges in the standard variable, so no panel spans the whole
/// Gaussian bulk and tail at once.
const BASE_CUTS: [f64; 7] = [-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0];

/// Piecewise Gauss–Legendre expectations under a normal law.
#[derive(Clone, Debug)]
pub struct NormalQuadrature {
    rule: GaussLegendre,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

impl NormalQuadrature {
    /// `order` nodes per panel.
    pub fn new(order: usize) -> Result<Self> {
        Ok(Self {
            rule: GaussLegendre::new(order)?,
        })
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// E f(Z), Z ~ N(0, 1), with panels split at `breaks`.
    pub fn expect(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        self.expect_affine(0.0, 1.0, breaks, |_, x| f(x))
    }

    /// E f(G, mean + sd·G) for G ~ N(0, 1), with panels split wherever
    /// `mean + sd·G` crosses one of `breaks`. The closure receives `(g, x)`.
    pub fn expect_affine(&self, mean: f64, sd: f64, breaks: &[f64], mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2 + BASE_CUTS.len());
        cuts.push(-TAIL);
        cuts.extend_from_slice(&BASE_CUTS);
        if sd.abs() > 0.0 {
            for &b in breaks {
                let g = (b - mean) / sd;
                if g > -TAIL && g < TAIL {
                    cuts.push(g);
                }
            }
        }
        cuts.push(TAIL);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            acc += self.rule.integrate(w[0], w[1], |g| normal_pdf(g) * f(g, mean + sd * g));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10).unwrap();
        // degree 19 is the highest exact degree for 10 nodes
        let exact = (3f64.powi(20) - 1.0) / 20.0;
        let got = gl.integrate(1.0, 3.0, |x| x.powi(19));
        assert!(((got - exact) / exact).abs() < 1e-13);
        let sum: f64 = gl.weights().iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_reproduces_gaussian_moments() {
        let gh = GaussHermite::new(40).unwrap();
        let moments = [(0, 1.0), (2, 1.0), (4, 3.0), (6, 15.0), (8, 105.0)];
        for (k, m) in moments {
            let got = gh.expect(|x| x.powi(k));
            assert!((got - m).abs() < 1e-10 * m, "moment {k}: {got}");
        }
        for order in [20, 80, 200] {
            let gh = GaussHermite::new(order).unwrap();
            assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-12, "order {order}");
            assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-11, "order {order}");
        }
    }

    #[test]
    fn piecewise_rule_handles_indicator_exactly() {
        let q = NormalQuadrature::new(40).unwrap();
        let m: f64 = 8.0;
        let r = m.sqrt();
        // E[z^2 1{z^2 <= M}] has a closed form
        let got = q.expect(&[-r, r], |z| if z * z <= m { z * z } else { 0.0 });
        // 1 - erfc(2) - 2√8 pdf(√8), evaluated at 30 digits
        let exact = 0.953_988_294_310_768_6;
        assert!((got - exact).abs() < 1e-14, "{got} vs {exact}");
    }

    #[test]
    fn affine_expectation_matches_moments() {
        let q = NormalQuadrature::new(30).unwrap();
        // E[(1 + 2G)^2] = 5
        let got = q.expect_affine(1.0, 2.0, &[0.5], |_, x| x * x);
        assert!((got - 5.0).abs() < 1e-12);
    }
}
