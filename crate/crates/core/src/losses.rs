//! Empirical and population losses and gradients.

use crate::activation::Activation;
use crate::error::{domain, Error, Result};
use crate::instance::Instance;
use crate::linalg::{dot, norm, project_out};
use crate::quadrature::NormalQuadrature;

/// Nodes per panel used when callers do not choose a quadrature order.
pub const DEFAULT_QUAD_ORDER: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub loss: f64,
    pub euclidean: Vec<f64>,
    /// Euclidean gradient with the component along θ removed.
    pub spherical: Vec<f64>,
    /// (A, B) with G(θ) = Aθ − Bθ⋆, when computed.
    pub stein: Option<(f64, f64)>,
}

fn check_dim(inst: &Instance, theta: &[f64]) -> Result<()> {
    if theta.len() != inst.d() {
        return domain(format!(
            "parameter has length {}, instance dimension is {}",
            theta.len(),
            inst.d()
        ));
    }
    Ok(())
}

fn check_unit(theta: &[f64]) -> Result<()> {
    let r = norm(theta);
    if (r - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "correlation loss needs a unit vector, got norm {r}"
        )));
    }
    Ok(())
}

fn tangent(theta: &[f64], g: &[f64]) -> Vec<f64> {
    let r = norm(theta);
    let mut s = g.to_vec();
    if r > 0.0 {
        let u: Vec<f64> = theta.iter().map(|t| t / r).collect();
        project_out(&mut s, &u);
    }
    s
}

/// −(1/n) Σ y_i σ(⟨x_i, θ⟩) for unit θ.
pub fn correlation_loss(inst: &Instance, theta: &[f64]) -> Result<f64> {
    check_dim(inst, theta)?;
    check_unit(theta)?;
    let act = inst.activation();
    let x = inst.x();
    let s: f64 = (0..inst.n())
        .map(|i| inst.y()[i] * act.value(dot(x.row(i), theta)))
        .sum();
    Ok(-s / inst.n() as f64)
}

/// Loss, Euclidean gradient −(1/n) Σ y_i σ'(⟨x_i, θ⟩) x_i and its tangent part.
pub fn grad_correlation(inst: &Instance, theta: &[f64]) -> Result<GradientReport> {
    check_dim(inst, theta)?;
    check_unit(theta)?;
    let act = inst.activation();
    let y = inst.y();
    let inv_n = 1.0 / inst.n() as f64;
    let mut loss = 0.0;
    let euclidean = inst.x().fused_apply(theta, |i, u| {
        let (s, ds) = act.eval(u);
        loss += y[i] * s;
        -y[i] * ds * inv_n
    });
    let spherical = tangent(theta, &euclidean);
    Ok(GradientReport {
        loss: -loss * inv_n,
        euclidean,
        spherical,
        stein: None,
    })
}

/// (1/2n) Σ (σ(⟨x_i, θ⟩) − y_i)².
pub fn squared_loss(inst: &Instance, theta: &[f64]) -> Result<f64> {
    check_dim(inst, theta)?;
    let act = inst.activation();
    let x = inst.x();
    let s: f64 = (0..inst.n())
        .map(|i| {
            let r = act.value(dot(x.row(i), theta)) - inst.y()[i];
            r * r
        })
        .sum();
    Ok(0.5 * s / inst.n() as f64)
}

/// Ĝ(θ) = (1/n) Σ (σ(⟨x_i, θ⟩) − y_i) σ'(⟨x_i, θ⟩) x_i, with the squared loss.
pub fn grad_squared(inst: &Instance, theta: &[f64]) -> Result<GradientReport> {
    check_dim(inst, theta)?;
    let act = inst.activation();
    let y = inst.y();
    let inv_n = 1.0 / inst.n() as f64;
    let mut loss = 0.0;
    let euclidean = inst.x().fused_apply(theta, |i, u| {
        let (s, ds) = act.eval(u);
        let r = s - y[i];
        loss += r * r;
        r * ds * inv_n
    });
    let spherical = tangent(theta, &euclidean);
    Ok(GradientReport {
        loss: 0.5 * loss * inv_n,
        euclidean,
        spherical,
        stein: None,
    })
}

/// Coordinates of θ in the plane spanned by θ⋆ and θ: θ = a·θ⋆ + b·e with
/// e ⟂ θ⋆ a unit vector and b ≥ 0. `e` is `None` when θ ∥ θ⋆.
struct Plane {
    a: f64,
    b: f64,
    e: Option<Vec<f64>>,
}

fn plane(theta: &[f64], theta_star: &[f64]) -> Plane {
    let a = dot(theta, theta_star);
    let mut e: Vec<f64> = theta.to_vec();
    project_out(&mut e, theta_star);
    let b = norm(&e);
    // below this the orthogonal part is round-off from the projection
    if b <= 1e-14 * norm(theta).max(f64::MIN_POSITIVE) {
        return Plane { a, b: 0.0, e: None };
    }
    e.iter_mut().for_each(|v| *v /= b);
    Plane { a, b, e: Some(e) }
}

/// E[f(z⋆, z, g₁, g₂)] with z⋆ = g₁ and z = a·g₁ + b·g₂ for independent
/// standard normals g₁, g₂.
fn plane_expect(
    quad: &NormalQuadrature,
    act: &Activation,
    a: f64,
    b: f64,
    mut f: impl FnMut(f64, f64, f64) -> f64,
) -> f64 {
    let kinks = act.breakpoints();
    let mut outer = kinks.clone();
    if a != 0.0 {
        outer.extend(kinks.iter().map(|k| k / a));
    }
    if b == 0.0 {
        return quad.expect(&outer, |g1| f(g1, a * g1, 0.0));
    }
    quad.expect(&outer, |g1| quad.expect_affine(a * g1, b, &kinks, |g2, z| f(g1, z, g2)))
}

fn check_population_args(theta: &[f64], theta_star: &[f64], order: usize) -> Result<()> {
    if order < 20 {
        return domain(format!("quadrature order must be at least 20, got {order}"));
    }
    if theta.len() != theta_star.len() {
        return domain("theta and theta_star differ in length");
    }
    if (norm(theta_star) - 1.0).abs() > 1e-8 {
        return domain("theta_star must be a unit vector");
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return domain("theta has non-finite entries");
    }
    Ok(())
}

/// G(θ) = E[(σ(⟨x,θ⟩) − σ(⟨x,θ⋆⟩)) σ'(⟨x,θ⟩) x] by quadrature in the plane
/// span{θ, θ⋆}; `order` is the number of Gauss–Legendre nodes per panel.
pub fn population_grad_squared(theta: &[f64], theta_star: &[f64], act: &Activation, order: usize) -> Result<Vec<f64>> {
    check_population_args(theta, theta_star, order)?;
    let quad = NormalQuadrature::new(order)?;
    let p = plane(theta, theta_star);
    let h = |g1: f64, z: f64| (act.value(z) - act.value(g1)) * act.derivative(z);
    let c1 = plane_expect(&quad, act, p.a, p.b, |g1, z, _| h(g1, z) * g1);
    let mut out: Vec<f64> = theta_star.iter().map(|t| c1 * t).collect();
    if let Some(e) = &p.e {
        let c2 = plane_expect(&quad, act, p.a, p.b, |g1, z, g2| h(g1, z) * g2);
        out.iter_mut().zip(e).for_each(|(o, ei)| *o += c2 * ei);
    }
    Ok(out)
}

/// Stein coefficients (A, B) of the population gradient, G(θ) = Aθ − Bθ⋆:
/// B = E[σ'(⟨x,θ⟩) σ'(⟨x,θ⋆⟩)] and A = (⟨G,θ⟩ + B⟨θ,θ⋆⟩)/‖θ‖².
pub fn stein_decomposition(theta: &[f64], theta_star: &[f64], act: &Activation, order: usize) -> Result<(f64, f64)> {
    check_population_args(theta, theta_star, order)?;
    let r2 = dot(theta, theta);
    if r2 == 0.0 {
        return domain("Stein decomposition is undefined at θ = 0");
    }
    let quad = NormalQuadrature::new(order)?;
    let p = plane(theta, theta_star);
    let b = plane_expect(&quad, act, p.a, p.b, |g1, z, _| act.derivative(z) * act.derivative(g1));
    let g = population_grad_squared(theta, theta_star, act, order)?;
    let a = (dot(&g, theta) + b * dot(theta, theta_star)) / r2;
    Ok((a, b))
}
