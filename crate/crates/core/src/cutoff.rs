//! The C∞ cutoff φ used by the smooth truncation.
//!
//! φ(u) = 1 − S((|u| − M)/M) with S(v) = γ(v)/(γ(v) + γ(1 − v)) and
//! γ(v) = e^{−1/v} for v > 0, γ = 0 otherwise. φ is 1 on |u| ≤ M, 0 on
//! |u| ≥ 2M, and S(v) + S(1 − v) = 1 makes its mass on [M, 2M] exactly M/2.

use crate::error::{domain, Result};
use crate::quadrature::GaussLegendre;

const PANELS: usize = 4096;
const PANEL_ORDER: usize = 16;
const LOCAL_ORDER: usize = 12;

#[inline]
fn bump(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        (-1.0 / v.max(1e-300)).exp()
    }
}

/// S(v): 0 for v ≤ 0, 1 for v ≥ 1.
pub fn smooth_step(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else if v >= 1.0 {
        1.0
    } else {
        let a = bump(v);
        let b = bump(1.0 - v);
        a / (a + b)
    }
}

/// S'(v) = γ(v)γ(1−v)(v⁻² + (1−v)⁻²)/(γ(v)+γ(1−v))².
pub fn smooth_step_derivative(v: f64) -> f64 {
    if v <= 0.0 || v >= 1.0 {
        return 0.0;
    }
    let a = bump(v);
    let b = bump(1.0 - v);
    let s = a + b;
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    (a / s) * (b / s) * (1.0 / (v * v) + 1.0 / ((1.0 - v) * (1.0 - v)))
}

#[derive(Clone, Debug)]
pub struct CutoffFunction {
    m: f64,
    h: f64,
    /// cumulative[k] = ∫_M^{M + k h} φ
    cumulative: Vec<f64>,
    local: GaussLegendre,
}

/// Builds the cutoff for threshold `m`.
pub fn make_cutoff(m: f64) -> Result<CutoffFunction> {
    CutoffFunction::new(m)
}

impl CutoffFunction {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return domain(format!("cutoff threshold must be positive and finite, got {m}"));
        }
        let h = m / PANELS as f64;
        let panel = GaussLegendre::new(PANEL_ORDER)?;
        let mut cumulative = Vec::with_capacity(PANELS + 1);
        cumulative.push(0.0);
        // Kahan-compensated running sum keeps the table accurate to round-off.
        let mut acc = 0.0f64;
        let mut comp = 0.0f64;
        for k in 0..PANELS {
            let a = m + k as f64 * h;
            let piece = panel.integrate(a, a + h, |u| phi_raw(m, u));
            let yv = piece - comp;
            let t = acc + yv;
            comp = (t - acc) - yv;
            acc = t;
            cumulative.push(acc);
        }
        Ok(Self {
            m,
            h,
            cumulative,
            local: GaussLegendre::new(LOCAL_ORDER)?,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// φ(u).
    pub fn phi(&self, u: f64) -> f64 {
        phi_raw(self.m, u)
    }

    /// φ'(u) = −sign(u) S'((|u| − M)/M)/M.
    pub fn dphi(&self, u: f64) -> f64 {
        let v = (u.abs() - self.m) / self.m;
        -u.signum() * smooth_step_derivative(v) / self.m
    }

    /// ∫₀^a φ for a ≥ 0; odd extension for a < 0.
    pub fn integral(&self, a: f64) -> f64 {
        if a < 0.0 {
            return -self.integral(-a);
        }
        if a <= self.m {
            return a;
        }
        if a >= 2.0 * self.m {
            return self.m + self.cumulative[PANELS];
        }
        let k = (((a - self.m) / self.h) as usize).min(PANELS - 1);
        let start = self.m + k as f64 * self.h;
        self.m + self.cumulative[k] + self.local.integrate(start, a, |u| phi_raw(self.m, u))
    }

    /// M̄ = ∫₀^{2M} φ, which equals 3M/2.
    pub fn m_bar(&self) -> f64 {
        self.m + self.cumulative[PANELS]
    }
}

#[inline]
fn phi_raw(m: f64, u: f64) -> f64 {
    1.0 - smooth_step((u.abs() - m) / m)
}
