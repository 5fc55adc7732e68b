use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::Activation;
use crate::error::{domain, Result};
use crate::linalg::{dot, norm, scale, DataMatrix};
use crate::rng::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThetaStarMode {
    #[default]
    UniformSphere,
    FirstBasisVector,
}

/// One sampled problem: rows x_i ~ N(0, I_d), labels y_i = σ(⟨x_i, θ⋆⟩).
#[derive(Clone, Debug)]
pub struct Instance {
    x: DataMatrix,
    y: Vec<f64>,
    theta_star: Vec<f64>,
    activation: Activation,
    seed: SeedStream,
}

pub fn sample_instance(
    d: usize,
    n: usize,
    activation: &Activation,
    seed: &SeedStream,
    mode: ThetaStarMode,
) -> Result<Instance> {
    if d < 2 {
        return domain(format!("dimension must be at least 2, got {d}"));
    }
    if n < 1 {
        return domain("sample count must be at least 1");
    }
    let theta_star = match mode {
        ThetaStarMode::UniformSphere => sample_sphere(d, 1.0, &seed.purpose("theta_star"))?,
        ThetaStarMode::FirstBasisVector => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        }
    };
    let rows = seed.purpose("rows");
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut rng = rows.row_rng(i as u64);
        data.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    }
    let x = DataMatrix::from_vec(n, d, data);
    let y = (0..n).map(|i| activation.value(dot(x.row(i), &theta_star))).collect();
    Ok(Instance {
        x,
        y,
        theta_star,
        activation: activation.clone(),
        seed: *seed,
    })
}

/// Uniform point on the sphere of radius `r0` (normalized Gaussian).
pub fn sample_sphere(d: usize, r0: f64, seed: &SeedStream) -> Result<Vec<f64>> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return domain(format!("radius must be positive, got {r0}"));
    }
    if d == 0 {
        return domain("dimension must be positive");
    }
    let mut rng = seed.rng();
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 0.0 {
            scale(r0 / r, &mut v);
            return Ok(v);
        }
    }
}

impl Instance {
    /// Assembles an instance from explicit parts, recomputing the labels.
    pub fn from_parts(x: DataMatrix, theta_star: Vec<f64>, activation: &Activation, seed: SeedStream) -> Result<Self> {
        if x.cols() != theta_star.len() {
            return domain("theta_star length does not match the data dimension");
        }
        if (norm(&theta_star) - 1.0).abs() > 1e-12 {
            return domain("theta_star must be a unit vector");
        }
        let y = (0..x.rows())
            .map(|i| activation.value(dot(x.row(i), &theta_star)))
            .collect();
        Ok(Self {
            x,
            y,
            theta_star,
            activation: activation.clone(),
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn delta(&self) -> f64 {
        self.n() as f64 / self.d() as f64
    }

    pub fn x(&self) -> &DataMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn seed(&self) -> &SeedStream {
        &self.seed
    }
}
