//! Dense vector helpers and a row-major data matrix.
//!
//! Reductions use four independent accumulators so the compiler can
//! vectorize them; the summation order is fixed, so results are bitwise
//! reproducible for a given input.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Normalizes in place and returns the previous norm. A zero vector is left
/// untouched.
pub fn normalize(x: &mut [f64]) -> f64 {
    let r = norm(x);
    if r > 0.0 {
        scale(1.0 / r, x);
    }
    r
}

/// Removes the component along the unit vector `u`.
pub fn project_out(x: &mut [f64], u: &[f64]) {
    let c = dot(x, u);
    axpy(-c, u, x);
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Row-major `rows x cols` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `X v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `X^T c`
    pub fn tr_mul_vec(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &ci) in c.iter().enumerate() {
            if ci != 0.0 {
                axpy(ci, self.row(i), &mut out);
            }
        }
        out
    }

    /// Single pass computing `sum_i f(i, <x_i, v>) x_i`.
    pub fn fused_apply(&self, v: &[f64], mut f: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let r = self.row(i);
            let c = f(i, dot(r, v));
            if c != 0.0 {
                axpy(c, r, &mut out);
            }
        }
        out
    }

    /// `sum_i w_i <x_i, v> x_i`, written into `out`.
    pub fn weighted_gram_apply(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let r = self.row(i);
            axpy(wi * dot(r, v), r, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        for len in [0usize, 1, 3, 4, 7, 33] {
            let a: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..len).map(|i| (i as f64 * 1.3).cos()).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert!((dot(&a, &b) - naive).abs() < 1e-13);
        }
    }

    #[test]
    fn fused_apply_matches_two_pass() {
        let x = DataMatrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0]);
        let v = [0.3, -0.7];
        let u = x.mul_vec(&v);
        let c: Vec<f64> = u.iter().map(|t| t * t - 1.0).collect();
        let two_pass = x.tr_mul_vec(&c);
        let fused = x.fused_apply(&v, |_, t| t * t - 1.0);
        for (a, b) in two_pass.iter().zip(&fused) {
            assert!((a - b).abs() < 1e-14);
        }
        let mut out = vec![0.0; 2];
        x.weighted_gram_apply(&[1.0, 1.0, 1.0], &v, &mut out);
        let direct = x.tr_mul_vec(&u);
        for (a, b) in direct.iter().zip(&out) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
