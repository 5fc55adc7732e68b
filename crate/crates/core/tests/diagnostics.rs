//! Phase times, rate fits, one-point convexity, Gram deviations and Stein
//! bounds on sampled instances.

use std::f64::consts::PI;

use sil_core::diagnostics::*;
use sil_core::linalg::{norm, normalize, project_out};
use sil_core::optim::{run_euclidean_gd, OptimizerConfig, StopRule, Termination};
use sil_core::{sample_instance, sample_sphere, Activation, Instance, SeedStream, ThetaStarMode};

const ETA: f64 = 0.1 / 64.0;

fn instance(act: &Activation, d: usize, n: usize, seed: &SeedStream) -> Instance {
    sample_instance(d, n, act, seed, ThetaStarMode::UniformSphere).unwrap()
}

fn hard() -> Activation {
    Activation::hard_trunc(8.0).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    0.5 * (v[(k - 1) / 2] + v[k / 2])
}

/// Unit vector at angle `phi` from θ⋆, in a random plane.
fn at_angle(ts: &[f64], phi: f64, seed: &SeedStream) -> Vec<f64> {
    let mut w = sample_sphere(ts.len(), 1.0, seed).unwrap();
    project_out(&mut w, ts);
    normalize(&mut w);
    ts.iter().zip(&w).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect()
}

#[test]
fn median_angle_time_is_within_three_predicted_times() {
    let d = 128;
    let cfg = OptimizerConfig::euclidean_gd(ETA, 20_000, 1.0 / (d * d) as f64)
        .with_record_every(1)
        .with_stop(StopRule {
            target_sq_overlap: Some(0.3f64.cos().powi(2)),
            ..Default::default()
        });
    let times: Vec<f64> = (0..32)
        .map(|s| {
            let seed = SeedStream::new(21).trial(s);
            let inst = instance(&hard(), d, 10 * d, &seed);
            let traj = run_euclidean_gd(&inst, &cfg, &seed).unwrap();
            let p = phase_times(&traj, d, ETA, 0.3, 1e-8);
            p.t_angle.expect("angle target reached") as f64
        })
        .collect();
    let pred = predicted_angle_time(d, ETA);
    let med = median(times);
    assert!(med <= 3.0 * pred, "median {med}, predicted {pred}");
}

#[test]
fn converged_run_has_a_geometric_tail() {
    let d = 128;
    let seed = SeedStream::new(22);
    let inst = instance(&hard(), d, 10 * d, &seed);
    let cfg = OptimizerConfig::euclidean_gd(ETA, 200_000, 1.0 / (d * d) as f64)
        .with_record_every(10)
        .with_stop(StopRule {
            target_dist_sq: Some(1e-13),
            ..Default::default()
        });
    let traj = run_euclidean_gd(&inst, &cfg, &seed).unwrap();
    assert_eq!(traj.termination, Termination::TargetDistance);
    let fit = geometric_rate_fit(&traj, 0.3, ETA).unwrap();
    assert!(fit.alpha > 0.0 && fit.r2 >= 0.95, "{fit:?}");
}

#[test]
fn one_point_convexity_examples() {
    let d = 128;
    let seed = SeedStream::new(23);
    let inst = instance(&hard(), d, 10 * d, &seed);
    let ts = inst.theta_star().to_vec();
    let outward: Vec<f64> = ts.iter().map(|v| 1.1 * v).collect();
    let c = one_point_convexity(&inst, &outward).unwrap();
    assert!(c >= 0.01, "{c}");

    let perp = at_angle(&ts, PI / 2.0, &seed.purpose("perp"));
    assert!(one_point_convexity(&inst, &perp).unwrap().is_finite());

    let dir = sample_sphere(d, 1.0, &seed.purpose("dir")).unwrap();
    let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|eps| {
            let th: Vec<f64> = ts.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
            one_point_convexity(&inst, &th).unwrap()
        })
        .collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(lo > 0.0 && hi <= 1.2 * lo, "{vals:?}");
}

#[test]
fn one_point_convexity_is_positive_in_the_refinement_region() {
    let d = 128;
    let seed = SeedStream::new(24);
    let inst = instance(&hard(), d, 10 * d, &seed);
    let ts = inst.theta_star().to_vec();
    let mut rng = seed.purpose("radii").rng();
    for k in 0..100 {
        use rand::Rng;
        let r: f64 = rng.gen_range(0.25..=10.0);
        let phi: f64 = rng.gen_range(0.0..=0.05);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let dir = at_angle(&ts, phi, &seed.trial(k));
        let th: Vec<f64> = dir.iter().map(|v| sign * r * v).collect();
        let c = one_point_convexity(&inst, &th).unwrap();
        assert!(c > 0.0, "‖θ‖ = {r}, angle = {phi}: {c}");
    }
}

#[test]
fn quadratic_population_gram_has_closed_form() {
    let d = 4;
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let (mean, se) = gram_population_mc(&Activation::quadratic(), &e1, &e1, 1_000_000, &SeedStream::new(25)).unwrap();
    for a in 0..d {
        for b in 0..d {
            let exact = match (a, b) {
                (0, 0) => 12.0,
                _ if a == b => 4.0,
                _ => 0.0,
            };
            assert!(
                (mean[(a, b)] - exact).abs() <= 4.0 * se[(a, b)],
                "({a},{b}): {} ± {}",
                mean[(a, b)],
                se[(a, b)]
            );
        }
    }
}

#[test]
fn gram_deviation_is_small_for_large_samples() {
    let d = 20;
    let seed = SeedStream::new(26);
    let inst = instance(&hard(), d, 1_000_000, &seed);
    let th = sample_sphere(d, 1.0, &seed.purpose("a")).unwrap();
    let tt = sample_sphere(d, 1.0, &seed.purpose("b")).unwrap();
    let dev = gram_deviation(&inst, &th, &tt, 1_000_000, &seed.purpose("mc")).unwrap();
    assert!(dev.deviation <= 0.05, "{dev:?}");
    assert!(gram_deviation(&inst, &th, &tt, 10, &seed).is_err());
}

#[test]
fn gram_deviation_decreases_with_sample_size() {
    let d = 20;
    let meds: Vec<f64> = [1000, 2000, 4000, 8000]
        .iter()
        .map(|&n| {
            median(
                (0..8)
                    .map(|s| {
                        let seed = SeedStream::new(27).trial(s);
                        let inst = instance(&hard(), d, n, &seed);
                        let th = sample_sphere(d, 1.0, &seed.purpose("a")).unwrap();
                        let tt = sample_sphere(d, 1.0, &seed.purpose("b")).unwrap();
                        gram_deviation(&inst, &th, &tt, 400_000, &SeedStream::new(270 + s))
                            .unwrap()
                            .deviation
                    })
                    .collect(),
            )
        })
        .collect();
    for w in meds.windows(2) {
        assert!(w[1] < w[0], "{meds:?}");
    }
}

#[test]
fn stein_bounds_examples() {
    let d = 10;
    let seed = SeedStream::new(28);
    let ts = sample_sphere(d, 1.0, &seed.purpose("star")).unwrap();

    let perp = at_angle(&ts, PI / 2.0, &seed.purpose("perp"));
    let r = stein_bounds_check(&perp, &ts, &hard(), Some(&perp), 1_000_000, &seed).unwrap();
    assert!(r.disagreement <= 1.0 + 3.0 * r.disagreement_se, "{r:?}");
    assert!((r.disagreement_bound - 1.0).abs() < 1e-12);

    let near = at_angle(&ts, 0.1, &seed.purpose("near"));
    let r = stein_bounds_check(&near, &ts, &hard(), None, 1_000_000, &seed).unwrap();
    let expect = 4.0 * (0.1f64.cos() - 3f64.sqrt() * (2.0 * (-4f64).exp() / 8f64.sqrt() + 2.0 * (-4f64).exp()).sqrt());
    assert!((r.b_lower - expect).abs() < 1e-12);
    assert!(r.b > r.b_lower, "{r:?}");
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert!((norm(&near) - 1.0).abs() < 1e-12);
}
