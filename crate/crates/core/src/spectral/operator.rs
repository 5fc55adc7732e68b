use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::linalg::{dot, DataMatrix};

/// A symmetric linear map on R^d.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// `out = A v`; `v` and `out` have length `dim()`.
    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return domain(format!(
                "vector has length {}, operator dimension is {}",
                v.len(),
                self.dim()
            ));
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Unit vector eigenvector overlaps are reported against, if any.
    fn reference(&self) -> Option<&[f64]> {
        None
    }
}

/// Σ_i w_i x_i x_iᵀ applied matrix-free.
#[derive(Clone, Debug)]
pub struct WeightedGram<'a> {
    x: &'a DataMatrix,
    weights: Vec<f64>,
}

impl<'a> WeightedGram<'a> {
    pub fn new(x: &'a DataMatrix, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != x.rows() {
            return domain("one weight per data row is required");
        }
        Ok(Self { x, weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Explicit d×d matrix, for small-dimension cross-checks.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let d = self.x.cols();
        let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let r = self.x.row(i);
            for a in 0..d {
                let wa = w * r[a];
                for b in 0..d {
                    m[(a, b)] += wa * r[b];
                }
            }
        }
        m
    }
}

impl SymmetricOperator for WeightedGram<'_> {
    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.x.weighted_gram_apply(&self.weights, v, out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightRule {
    /// w_i = y_i: A⋆ and D_n.
    Constant,
    /// w_i = y_i·φ(⟨x_i, θ⟩²): A(θ). φ is the activation's weight function
    /// (1, an indicator, or the smooth cutoff).
    CutoffAt(Vec<f64>),
}

/// scale·(1/n)·Σ w_i x_i x_iᵀ over an instance.
#[derive(Clone, Debug)]
pub struct SpikedOperator<'a> {
    inst: &'a Instance,
    rule: WeightRule,
    scale: f64,
    gram: WeightedGram<'a>,
}

impl<'a> SpikedOperator<'a> {
    pub fn new(inst: &'a Instance, rule: WeightRule, scale: f64) -> Result<Self> {
        let n = inst.n() as f64;
        let weights: Vec<f64> = match &rule {
            WeightRule::Constant => inst.y().iter().map(|y| scale * y / n).collect(),
            WeightRule::CutoffAt(theta) => {
                if theta.len() != inst.d() {
                    return domain("cutoff point has the wrong dimension");
                }
                let act = inst.activation();
                (0..inst.n())
                    .map(|i| {
                        let u = dot(inst.x().row(i), theta);
                        scale * inst.y()[i] * act.weight(u * u) / n
                    })
                    .collect()
            }
        };
        let gram = WeightedGram::new(inst.x(), weights)?;
        Ok(Self {
            inst,
            rule,
            scale,
            gram,
        })
    }

    /// A⋆ = (2/n) Σ y_i x_i x_iᵀ.
    pub fn a_star(inst: &'a Instance) -> Self {
        Self::new(inst, WeightRule::Constant, 2.0).expect("constant rule is always valid")
    }

    /// A(θ) = (2/n) Σ y_i φ(⟨x_i, θ⟩²) x_i x_iᵀ.
    pub fn a_theta(inst: &'a Instance, theta: &[f64]) -> Result<Self> {
        Self::new(inst, WeightRule::CutoffAt(theta.to_vec()), 2.0)
    }

    /// D_n = (1/n) Σ y_i x_i x_iᵀ.
    pub fn d_n(inst: &'a Instance) -> Self {
        Self::new(inst, WeightRule::Constant, 1.0).expect("constant rule is always valid")
    }

    pub fn rule(&self) -> &WeightRule {
        &self.rule
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    pub fn gram(&self) -> &WeightedGram<'a> {
        &self.gram
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        self.gram.to_dense()
    }
}

impl SymmetricOperator for SpikedOperator<'_> {
    fn dim(&self) -> usize {
        self.inst.d()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.gram.apply_into(v, out);
    }

    fn reference(&self) -> Option<&[f64]> {
        Some(self.inst.theta_star())
    }
}

/// diag(values); handy for solver tests.
#[derive(Clone, Debug)]
pub struct DiagonalOperator(pub Vec<f64>);

impl SymmetricOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&self.0).zip(v) {
            *o = a * b;
        }
    }
}
