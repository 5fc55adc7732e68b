use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::cutoff::CutoffFunction;
use crate::error::{domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivationKind {
    Quadratic,
    HardTrunc,
    SmoothTrunc,
}

impl ActivationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActivationKind::Quadratic => "quadratic",
            ActivationKind::HardTrunc => "hard_trunc",
            ActivationKind::SmoothTrunc => "smooth_trunc",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(ActivationKind::Quadratic),
            "hard_trunc" => Ok(ActivationKind::HardTrunc),
            "smooth_trunc" => Ok(ActivationKind::SmoothTrunc),
            other => domain(format!(
                "unknown activation `{other}` (expected quadratic, hard_trunc or smooth_trunc)"
            )),
        }
    }
}

/// σ together with its threshold. All kinds agree with z² on z² ≤ M;
/// the quadratic kind carries M = ∞.
#[derive(Clone, Debug)]
pub struct Activation {
    kind: ActivationKind,
    m: f64,
    root_m: f64,
    cutoff: Option<Arc<CutoffFunction>>,
}

impl Activation {
    pub fn quadratic() -> Self {
        Self {
            kind: ActivationKind::Quadratic,
            m: f64::INFINITY,
            root_m: f64::INFINITY,
            cutoff: None,
        }
    }

    pub fn hard_trunc(m: f64) -> Result<Self> {
        check_threshold(m)?;
        Ok(Self {
            kind: ActivationKind::HardTrunc,
            m,
            root_m: m.sqrt(),
            cutoff: None,
        })
    }

    pub fn smooth_trunc(m: f64) -> Result<Self> {
        check_threshold(m)?;
        Ok(Self {
            kind: ActivationKind::SmoothTrunc,
            m,
            root_m: m.sqrt(),
            cutoff: Some(Arc::new(CutoffFunction::new(m)?)),
        })
    }

    /// `m` is ignored for the quadratic kind.
    pub fn new(kind: ActivationKind, m: f64) -> Result<Self> {
        match kind {
            ActivationKind::Quadratic => Ok(Self::quadratic()),
            ActivationKind::HardTrunc => Self::hard_trunc(m),
            ActivationKind::SmoothTrunc => Self::smooth_trunc(m),
        }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn cutoff(&self) -> Option<&CutoffFunction> {
        self.cutoff.as_deref()
    }

    /// (σ(z), σ'(z)).
    #[inline]
    pub fn eval(&self, z: f64) -> (f64, f64) {
        (self.value(z), self.derivative(z))
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let u = z * z;
        match self.kind {
            ActivationKind::Quadratic => u,
            ActivationKind::HardTrunc => u.min(self.m),
            ActivationKind::SmoothTrunc => {
                if u <= self.m {
                    u
                } else {
                    self.smooth().integral(u)
                }
            }
        }
    }

    /// σ'(z) = 2z·w(z²); at the hard kink |z| = √M the quadratic branch applies.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        // compare |z| against √M so the kink convention survives z² round-off
        if z.abs() <= self.root_m {
            2.0 * z
        } else {
            2.0 * z * self.weight(z * z)
        }
    }

    /// w(u) with σ'(z) = 2z·w(z²): 1, 1{u ≤ M} or φ(u).
    #[inline]
    pub fn weight(&self, u: f64) -> f64 {
        match self.kind {
            ActivationKind::Quadratic => 1.0,
            ActivationKind::HardTrunc => {
                if u <= self.m {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::SmoothTrunc => {
                if u <= self.m {
                    1.0
                } else {
                    self.smooth().phi(u)
                }
            }
        }
    }

    /// sup σ: M (hard), 3M/2 (smooth), ∞ (quadratic).
    pub fn sup(&self) -> f64 {
        match self.kind {
            ActivationKind::Quadratic => f64::INFINITY,
            ActivationKind::HardTrunc => self.m,
            ActivationKind::SmoothTrunc => self.smooth().m_bar(),
        }
    }

    /// Points in z where σ stops being a polynomial, sorted ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            ActivationKind::Quadratic => vec![],
            ActivationKind::HardTrunc => {
                let r = self.m.sqrt();
                vec![-r, r]
            }
            ActivationKind::SmoothTrunc => {
                let r1 = self.m.sqrt();
                let r2 = (2.0 * self.m).sqrt();
                vec![-r2, -r1, r1, r2]
            }
        }
    }

    fn smooth(&self) -> &CutoffFunction {
        self.cutoff
            .as_deref()
            .expect("smooth truncation always carries a cutoff")
    }
}

fn check_threshold(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        domain(format!("truncation level must be positive and finite, got {m}"))
    }
}
