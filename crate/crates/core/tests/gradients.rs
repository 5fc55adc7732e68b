//! Loss and gradient checks against finite differences, the matrix-free A⋆,
//! and Monte-Carlo estimates of population expectations.

use rand::Rng;
use rand_distr::StandardNormal;
use sil_core::linalg::{dot, norm, normalize, project_out};
use sil_core::losses::{
    correlation_loss, grad_correlation, grad_squared, population_grad_squared, squared_loss, stein_decomposition,
};
use sil_core::spectral::{top2_eigs, SpikedOperator, SymmetricOperator};
use sil_core::{sample_instance, sample_sphere, Activation, Instance, SeedStream, ThetaStarMode};

fn instance(act: &Activation, d: usize, n: usize, seed: u64) -> Instance {
    sample_instance(d, n, act, &SeedStream::new(seed), ThetaStarMode::UniformSphere).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    norm(&diff) / norm(b).max(1e-300)
}

/// Orthonormal basis of the tangent space at the unit vector θ.
fn tangent_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    let d = theta.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        project_out(&mut e, theta);
        for b in &basis {
            project_out(&mut e, b);
        }
        if normalize(&mut e) > 1e-6 {
            basis.push(e);
        }
    }
    assert_eq!(basis.len(), d - 1);
    basis
}

#[test]
fn spherical_gradient_matches_geodesic_differences() {
    let act = Activation::smooth_trunc(8.0).unwrap();
    for seed in 0..4 {
        let inst = instance(&act, 10, 200, seed);
        let theta = sample_sphere(10, 1.0, &SeedStream::new(100 + seed)).unwrap();
        let g = grad_correlation(&inst, &theta).unwrap().spherical;
        let h = 2e-5;
        let mut fd = vec![0.0; 10];
        for u in tangent_basis(&theta) {
            let at = |s: f64| -> f64 {
                let p: Vec<f64> = theta.iter().zip(&u).map(|(t, v)| s.cos() * t + s.sin() * v).collect();
                correlation_loss(&inst, &p).unwrap()
            };
            let deriv = (at(h) - at(-h)) / (2.0 * h);
            fd.iter_mut().zip(&u).for_each(|(f, v)| *f += deriv * v);
        }
        let e = rel_err(&g, &fd);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
    }
}

#[test]
fn squared_gradient_matches_differences_away_from_kinks() {
    let act = Activation::hard_trunc(8.0).unwrap();
    let mut checked = 0;
    for seed in 0..40 {
        let d = 10;
        let inst = instance(&act, d, 200, seed);
        let theta = sample_sphere(d, 3.0, &SeedStream::new(500 + seed)).unwrap();
        let gap = (0..inst.n())
            .map(|i| {
                let u = dot(inst.x().row(i), &theta);
                (u * u - 8.0).abs()
            })
            .fold(f64::INFINITY, f64::min);
        if gap <= 1e-3 {
            continue;
        }
        let h = 1e-5 * (1.0 + norm(&theta));
        // a step must not carry any sample across the kink
        let max_row = (0..inst.n()).map(|i| norm(inst.x().row(i))).fold(0.0, f64::max);
        let max_u = (0..inst.n())
            .map(|i| dot(inst.x().row(i), &theta).abs())
            .fold(0.0, f64::max);
        if 2.0 * (max_u + h * max_row) * h * max_row >= gap {
            continue;
        }
        let g = grad_squared(&inst, &theta).unwrap().euclidean;
        let fd: Vec<f64> = (0..d)
            .map(|j| {
                let mut p = theta.clone();
                let mut m = theta.clone();
                p[j] += h;
                m[j] -= h;
                (squared_loss(&inst, &p).unwrap() - squared_loss(&inst, &m).unwrap()) / (2.0 * h)
            })
            .collect();
        let e = rel_err(&g, &fd);
        assert!(e < 1e-4, "seed {seed}: relative error {e}");
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} kink-free draws");
}

#[test]
fn quadratic_correlation_gradient_is_minus_a_star_theta() {
    let act = Activation::quadratic();
    let inst = instance(&act, 200, 400, 7);
    let op = SpikedOperator::a_star(&inst);
    for s in 0..3 {
        let theta = sample_sphere(200, 1.0, &SeedStream::new(s)).unwrap();
        let g = grad_correlation(&inst, &theta).unwrap().euclidean;
        let a = op.apply(&theta).unwrap();
        let worst = g.iter().zip(&a).map(|(p, q)| (p + q).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
    }
}

#[test]
fn eigenvector_of_a_star_is_stationary() {
    let act = Activation::quadratic();
    let inst = instance(&act, 30, 300, 8);
    let r = top2_eigs(&SpikedOperator::a_star(&inst), 1e-13, 100_000, 1).unwrap();
    let g = grad_correlation(&inst, &r.v1).unwrap().spherical;
    assert!(norm(&g) <= 1e-8, "{}", norm(&g));
}

#[test]
fn population_gradient_matches_monte_carlo() {
    let d = 20;
    for (k, act) in [
        Activation::hard_trunc(8.0).unwrap(),
        Activation::smooth_trunc(8.0).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = SeedStream::new(40 + k as u64);
        let ts = sample_sphere(d, 1.0, &seed.purpose("star")).unwrap();
        let theta = sample_sphere(d, 1.3, &seed.purpose("theta")).unwrap();
        let g = population_grad_squared(&theta, &ts, &act, 32).unwrap();

        let samples = 10_000_000usize;
        let mut rng = seed.purpose("mc").rng();
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let mut x = vec![0.0; d];
        for _ in 0..samples {
            x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let (s, ds) = act.eval(dot(&x, &theta));
            let c = (s - act.value(dot(&x, &ts))) * ds;
            for j in 0..d {
                let v = c * x[j];
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        let m = samples as f64;
        for j in 0..d {
            let mean = sum[j] / m;
            let se = ((sum_sq[j] / m - mean * mean) / m).sqrt();
            assert!(
                (g[j] - mean).abs() <= 4.0 * se,
                "{act:?} coordinate {j}: {} vs {mean} ± {se}",
                g[j]
            );
        }
    }
}

#[test]
fn quadratic_population_gradient_points_against_truth() {
    let d = 8;
    let ts = sample_sphere(d, 1.0, &SeedStream::new(1)).unwrap();
    let noise = sample_sphere(d, 1.0, &SeedStream::new(2)).unwrap();
    let theta: Vec<f64> = ts.iter().zip(&noise).map(|(a, b)| 0.01 * (a + 0.5 * b)).collect();
    assert!(dot(&theta, &ts) > 0.0);
    let g = population_grad_squared(&theta, &ts, &Activation::quadratic(), 24).unwrap();
    assert!(dot(&g, &ts) < 0.0);
    assert!(population_grad_squared(&theta, &ts, &Activation::quadratic(), 19).is_err());
}

#[test]
fn stein_b_matches_monte_carlo_for_hard_truncation() {
    let act = Activation::hard_trunc(8.0).unwrap();
    let phi = std::f64::consts::PI / 8.0;
    let mut ts = vec![0.0; 6];
    ts[0] = 1.0;
    let mut theta = vec![0.0; 6];
    theta[0] = phi.cos();
    theta[1] = phi.sin();
    let (_, b) = stein_decomposition(&theta, &ts, &act, 32).unwrap();

    let samples = 10_000_000usize;
    let mut rng = SeedStream::new(77).rng();
    let (mut s1, mut s2) = (0.0, 0.0);
    let root = 8f64.sqrt();
    for _ in 0..samples {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        let z = phi.cos() * g1 + phi.sin() * g2;
        let v = if z.abs() <= root && g1.abs() <= root {
            4.0 * z * g1
        } else {
            0.0
        };
        s1 += v;
        s2 += v * v;
    }
    let m = samples as f64;
    let mean = s1 / m;
    let se = ((s2 / m - mean * mean) / m).sqrt();
    assert!((b - mean).abs() <= 3.0 * se, "B = {b}, MC {mean} ± {se}");
}

#[test]
fn stein_coefficients_reassemble_the_gradient() {
    let ts = sample_sphere(5, 1.0, &SeedStream::new(3)).unwrap();
    for act in [Activation::quadratic(), Activation::hard_trunc(8.0).unwrap()] {
        for c in [0.3, 1.0, 2.5] {
            let theta: Vec<f64> = ts.iter().map(|v| c * v).collect();
            let (a, b) = stein_decomposition(&theta, &ts, &act, 40).unwrap();
            if act.kind() == sil_core::ActivationKind::Quadratic {
                assert!((b - 4.0 * c).abs() < 1e-8, "{b}");
            }
            let g = population_grad_squared(&theta, &ts, &act, 40).unwrap();
            for j in 0..5 {
                assert!((g[j] - (a * theta[j] - b * ts[j])).abs() < 1e-8);
            }
        }
    }
    assert!(stein_decomposition(&[0.0; 5], &ts, &Activation::quadratic(), 40).is_err());
}

#[test]
fn empirical_gradient_concentrates_on_population() {
    let act = Activation::smooth_trunc(8.0).unwrap();
    let d = 20;
    let theta = sample_sphere(d, 0.8, &SeedStream::new(11)).unwrap();
    let mut previous = f64::INFINITY;
    for n in [1_000, 10_000, 100_000] {
        let inst = instance(&act, d, n, 12);
        let g_hat = grad_squared(&inst, &theta).unwrap().euclidean;
        let g = population_grad_squared(&theta, inst.theta_star(), &act, 32).unwrap();
        let err = norm(&g_hat.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
        // trace of the per-sample gradient covariance, estimated from the sample
        let mut second = 0.0;
        for i in 0..n {
            let r = inst.x().row(i);
            let (s, ds) = act.eval(dot(r, &theta));
            let c = (s - inst.y()[i]) * ds;
            second += c * c * dot(r, r);
        }
        let trace_var = second / n as f64 - dot(&g_hat, &g_hat);
        assert!(err <= 5.0 * (trace_var / n as f64).sqrt(), "n = {n}: {err}");
        assert!(err < previous, "n = {n}: {err} ≥ {previous}");
        previous = err;
    }
}
