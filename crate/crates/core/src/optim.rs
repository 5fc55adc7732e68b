//! Spherical GD on the correlation loss, Euclidean GD on the squared loss,
//! and one-pass spherical SGD.

use std::fmt;
use std::str::FromStr;

use crate::activation::ActivationKind;
use crate::error::{domain, Error, Result};
use crate::instance::{sample_sphere, Instance};
use crate::linalg::{all_finite, axpy, dist_sq, dot, norm, normalize, project_out, DataMatrix};
use crate::losses::{grad_correlation, grad_squared};
use crate::rng::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SphericalGd,
    EuclideanGd,
    OnlineSgd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::SphericalGd => "spherical_gd",
            Method::EuclideanGd => "euclidean_gd",
            Method::OnlineSgd => "online_sgd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical_gd" => Ok(Method::SphericalGd),
            "euclidean_gd" => Ok(Method::EuclideanGd),
            "online_sgd" => Ok(Method::OnlineSgd),
            other => domain(format!(
                "unknown method `{other}` (expected spherical_gd, euclidean_gd or online_sgd)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Correlation,
    Squared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    UnitSphere,
    Sphere(f64),
}

/// Optional early-termination rules; every rule is off by default.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StopRule {
    pub target_sq_overlap: Option<f64>,
    /// Compared against min(‖θ − θ⋆‖², ‖θ + θ⋆‖²).
    pub target_dist_sq: Option<f64>,
    /// Stop once the norm of the (spherical or Euclidean) gradient is below this.
    pub grad_tol: Option<f64>,
    /// Stop once |L_t − L_{t−2}| ≤ 1e-12·max(1, |L_t|) has held for this many
    /// consecutive steps. Detects fixed points and period-2 orbits.
    pub stall_window: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub loss: LossKind,
    pub eta: f64,
    /// Maximum number of updates.
    pub horizon: usize,
    pub init: Init,
    /// `None` selects max(1, horizon/2000).
    pub record_every: Option<usize>,
    pub stop: StopRule,
    /// Keep θ at every recorded step.
    pub keep_iterates: bool,
}

pub const STALL_RTOL: f64 = 1e-12;

impl OptimizerConfig {
    pub fn spherical_gd(eta: f64, horizon: usize) -> Self {
        Self {
            method: Method::SphericalGd,
            loss: LossKind::Correlation,
            eta,
            horizon,
            init: Init::UnitSphere,
            record_every: None,
            stop: StopRule::default(),
            keep_iterates: false,
        }
    }

    pub fn euclidean_gd(eta: f64, horizon: usize, r0: f64) -> Self {
        Self {
            method: Method::EuclideanGd,
            loss: LossKind::Squared,
            init: Init::Sphere(r0),
            ..Self::spherical_gd(eta, horizon)
        }
    }

    pub fn online_sgd(eta: f64, horizon: usize) -> Self {
        Self {
            method: Method::OnlineSgd,
            ..Self::spherical_gd(eta, horizon)
        }
    }

    /// Step size 0.5/d.
    pub fn default_online_eta(d: usize) -> f64 {
        0.5 / d as f64
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = Some(k);
        self
    }

    pub fn with_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }

    pub fn record_cadence(&self) -> usize {
        self.record_every.unwrap_or((self.horizon / 2000).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return domain(format!("step size must be positive, got {}", self.eta));
        }
        if self.horizon == 0 {
            return domain("horizon must be positive");
        }
        if self.record_every == Some(0) {
            return domain("record_every must be positive");
        }
        match self.method {
            Method::SphericalGd | Method::OnlineSgd => {
                if self.loss != LossKind::Correlation {
                    return domain(format!("{} requires the correlation loss", self.method));
                }
                if self.init != Init::UnitSphere {
                    return domain(format!("{} starts on the unit sphere", self.method));
                }
            }
            Method::EuclideanGd => {
                if self.loss != LossKind::Squared {
                    return domain("euclidean_gd requires the squared loss");
                }
                if let Init::Sphere(r0) = self.init {
                    if !(r0 > 0.0) || !r0.is_finite() {
                        return domain(format!("init radius must be positive, got {r0}"));
                    }
                }
            }
        }
        if self.stop.stall_window == Some(0) {
            return domain("stall window must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub overlap: f64,
    pub sq_overlap: f64,
    /// Sign-folded angle to θ⋆, in [0, π/2].
    pub angle: f64,
    pub norm: f64,
    pub loss: f64,
    /// min(‖θ − θ⋆‖², ‖θ + θ⋆‖²).
    pub dist_sq: f64,
}

impl StepRecord {
    fn measure(t: usize, theta: &[f64], theta_star: &[f64], loss: f64) -> Self {
        let r = norm(theta);
        let c = dot(theta, theta_star);
        let overlap = if r > 0.0 { (c.abs() / r).min(1.0) } else { 0.0 };
        Self {
            t,
            overlap,
            sq_overlap: overlap * overlap,
            angle: overlap.acos(),
            norm: r,
            loss,
            dist_sq: if c >= 0.0 {
                dist_sq(theta, theta_star)
            } else {
                theta.iter().zip(theta_star).map(|(a, b)| (a + b) * (a + b)).sum()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    TargetOverlap,
    TargetDistance,
    Stationary,
    Stalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::TargetOverlap => "target_overlap",
            Termination::TargetDistance => "target_distance",
            Termination::Stationary => "stationary",
            Termination::Stalled => "stalled",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub theta: Vec<f64>,
    pub termination: Termination,
    /// θ at each recorded step, aligned with `steps`, when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.steps
            .last()
            .expect("trajectories record at least the initial step")
    }

    /// Number of updates applied.
    pub fn steps_taken(&self) -> usize {
        self.last().t
    }
}

struct Recorder<'a> {
    cadence: usize,
    theta_star: &'a [f64],
    steps: Vec<StepRecord>,
    iterates: Option<Vec<Vec<f64>>>,
}

impl<'a> Recorder<'a> {
    fn new(config: &OptimizerConfig, theta_star: &'a [f64]) -> Self {
        Self {
            cadence: config.record_cadence(),
            theta_star,
            steps: Vec::new(),
            iterates: config.keep_iterates.then(Vec::new),
        }
    }

    fn record(&mut self, t: usize, theta: &[f64], loss: f64, force: bool) -> StepRecord {
        let rec = StepRecord::measure(t, theta, self.theta_star, loss);
        let due = force || t.is_multiple_of(self.cadence);
        if due && self.steps.last().is_none_or(|p| p.t < t) {
            self.steps.push(rec);
            if let Some(it) = self.iterates.as_mut() {
                it.push(theta.to_vec());
            }
        }
        rec
    }

    fn finish(self, theta: Vec<f64>, termination: Termination) -> Trajectory {
        Trajectory {
            steps: self.steps,
            theta,
            termination,
            iterates: self.iterates,
        }
    }
}

struct StallDetector {
    window: Option<usize>,
    history: [f64; 2],
    seen: usize,
    run: usize,
}

impl StallDetector {
    fn new(window: Option<usize>) -> Self {
        Self {
            window,
            history: [f64::NAN; 2],
            seen: 0,
            run: 0,
        }
    }

    /// Feeds L_t; true once the stall condition has held `window` times in a row.
    fn push(&mut self, loss: f64) -> bool {
        let Some(window) = self.window else {
            return false;
        };
        if self.seen >= 2 {
            let back2 = self.history[self.seen % 2];
            if (loss - back2).abs() <= STALL_RTOL * loss.abs().max(1.0) {
                self.run += 1;
            } else {
                self.run = 0;
            }
        }
        self.history[self.seen % 2] = loss;
        self.seen += 1;
        self.run >= window
    }
}

fn check_target(stop: &StopRule, rec: &StepRecord) -> Option<Termination> {
    if stop.target_sq_overlap.is_some_and(|t| rec.sq_overlap >= t) {
        return Some(Termination::TargetOverlap);
    }
    if stop.target_dist_sq.is_some_and(|t| rec.dist_sq <= t) {
        return Some(Termination::TargetDistance);
    }
    None
}

fn ensure_method(config: &OptimizerConfig, method: Method) -> Result<()> {
    config.validate()?;
    if config.method != method {
        return domain(format!("configuration is for {}, not {}", config.method, method));
    }
    Ok(())
}

fn diverged(step: usize, what: &str) -> Error {
    Error::Diverged {
        step,
        detail: format!("non-finite {what}"),
    }
}

/// Unit-sphere initial point for the spherical methods.
pub fn initial_point(inst: &Instance, config: &OptimizerConfig, seed: &SeedStream) -> Result<Vec<f64>> {
    let r = match config.init {
        Init::UnitSphere => 1.0,
        Init::Sphere(r0) => r0,
    };
    sample_sphere(inst.d(), r, &seed.purpose("init"))
}

/// Dense A⋆ = (2/n) Σ y_i x_i x_iᵀ. With σ = z² the gradient is exactly −A⋆θ,
/// and once a run has lasted d steps a d×d product per step is cheaper than
/// two passes over the data.
fn dense_quadratic_operator(inst: &Instance) -> nalgebra::DMatrix<f64> {
    let x = inst.x();
    let (n, d) = (x.rows(), x.cols());
    let scale = (2.0 / n as f64).sqrt();
    let weighted = nalgebra::DMatrix::from_fn(n, d, |i, j| x.row(i)[j] * inst.y()[i].sqrt() * scale);
    weighted.tr_mul(&weighted)
}

fn dense_switch_step(inst: &Instance) -> Option<usize> {
    (inst.activation().kind() == ActivationKind::Quadratic && inst.n() >= inst.d()).then_some(inst.d())
}

pub fn run_spherical_gd(inst: &Instance, config: &OptimizerConfig, seed: &SeedStream) -> Result<Trajectory> {
    ensure_method(config, Method::SphericalGd)?;
    let theta0 = initial_point(inst, config, seed)?;
    run_spherical_gd_from(inst, config, theta0)
}

/// Spherical GD from an explicit unit-norm starting point:
/// θ ← normalize(θ − η(I − θθᵀ)∇L̂(θ)).
pub fn run_spherical_gd_from(inst: &Instance, config: &OptimizerConfig, theta0: Vec<f64>) -> Result<Trajectory> {
    ensure_method(config, Method::SphericalGd)?;
    if theta0.len() != inst.d() {
        return domain("initial point has the wrong dimension");
    }
    let mut theta = theta0;
    if (norm(&theta) - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("spherical GD starts on the unit sphere".into()));
    }
    normalize(&mut theta);
    let switch = dense_switch_step(inst);
    let mut dense: Option<nalgebra::DMatrix<f64>> = None;
    let mut rec = Recorder::new(config, inst.theta_star());
    let mut stall = StallDetector::new(config.stop.stall_window);
    for t in 0..=config.horizon {
        if dense.is_none() && switch.is_some_and(|s| t >= s) {
            dense = Some(dense_quadratic_operator(inst));
        }
        let (loss, mut g) = match &dense {
            Some(a) => {
                let v = nalgebra::DVector::from_column_slice(&theta);
                let av = a * &v;
                // −(1/n)Σ y⟨x,θ⟩² = −θᵀA⋆θ/2
                let loss = -0.5 * v.dot(&av);
                (loss, av.iter().map(|c| -c).collect::<Vec<f64>>())
            }
            None => {
                let r = grad_correlation(inst, &theta)?;
                (r.loss, r.euclidean)
            }
        };
        project_out(&mut g, &theta);
        if !loss.is_finite() || !all_finite(&g) {
            return Err(diverged(t, "gradient"));
        }
        let stop = check_target(&config.stop, &StepRecord::measure(t, &theta, inst.theta_star(), loss))
            .or_else(|| {
                config
                    .stop
                    .grad_tol
                    .filter(|&tol| norm(&g) <= tol)
                    .map(|_| Termination::Stationary)
            })
            .or_else(|| stall.push(loss).then_some(Termination::Stalled))
            .or((t == config.horizon).then_some(Termination::Horizon));
        rec.record(t, &theta, loss, stop.is_some());
        if let Some(reason) = stop {
            return Ok(rec.finish(theta, reason));
        }
        axpy(-config.eta, &g, &mut theta);
        if normalize(&mut theta) == 0.0 || !all_finite(&theta) {
            return Err(diverged(t + 1, "iterate"));
        }
    }
    unreachable!("the loop returns at the horizon")
}

pub fn run_euclidean_gd(inst: &Instance, config: &OptimizerConfig, seed: &SeedStream) -> Result<Trajectory> {
    ensure_method(config, Method::EuclideanGd)?;
    let theta0 = initial_point(inst, config, seed)?;
    run_euclidean_gd_from(inst, config, theta0)
}

/// θ ← θ − ηĜ(θ) on the squared loss, without renormalization.
pub fn run_euclidean_gd_from(inst: &Instance, config: &OptimizerConfig, theta0: Vec<f64>) -> Result<Trajectory> {
    ensure_method(config, Method::EuclideanGd)?;
    if theta0.len() != inst.d() {
        return domain("initial point has the wrong dimension");
    }
    let mut theta = theta0;
    let mut rec = Recorder::new(config, inst.theta_star());
    let mut stall = StallDetector::new(config.stop.stall_window);
    for t in 0..=config.horizon {
        let r = grad_squared(inst, &theta)?;
        if !r.loss.is_finite() || !all_finite(&r.euclidean) {
            return Err(diverged(t, "gradient"));
        }
        let stop = check_target(&config.stop, &StepRecord::measure(t, &theta, inst.theta_star(), r.loss))
            .or_else(|| {
                config
                    .stop
                    .grad_tol
                    .filter(|&tol| norm(&r.euclidean) <= tol)
                    .map(|_| Termination::Stationary)
            })
            .or_else(|| stall.push(r.loss).then_some(Termination::Stalled))
            .or((t == config.horizon).then_some(Termination::Horizon));
        rec.record(t, &theta, r.loss, stop.is_some());
        if let Some(reason) = stop {
            return Ok(rec.finish(theta, reason));
        }
        axpy(-config.eta, &r.euclidean, &mut theta);
        if !all_finite(&theta) {
            return Err(diverged(t + 1, "iterate"));
        }
    }
    unreachable!("the loop returns at the horizon")
}

pub fn run_online_sgd(inst: &Instance, config: &OptimizerConfig, seed: &SeedStream) -> Result<Trajectory> {
    ensure_method(config, Method::OnlineSgd)?;
    let theta0 = initial_point(inst, config, seed)?;
    run_online_sgd_from(inst, config, theta0)
}

/// One pass of spherical SGD: step t uses sample t only. The recorded loss is
/// the single-sample correlation loss −y_t σ(⟨x_t, θ_t⟩) of the sample about
/// to be used (the final record reuses the last sample).
pub fn run_online_sgd_from(inst: &Instance, config: &OptimizerConfig, theta0: Vec<f64>) -> Result<Trajectory> {
    ensure_method(config, Method::OnlineSgd)?;
    if config.horizon > inst.n() {
        return domain(format!(
            "one-pass SGD needs horizon ≤ n, got horizon {} with n = {}",
            config.horizon,
            inst.n()
        ));
    }
    if theta0.len() != inst.d() {
        return domain("initial point has the wrong dimension");
    }
    let mut theta = theta0;
    if (norm(&theta) - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition("online SGD starts on the unit sphere".into()));
    }
    normalize(&mut theta);
    let x: &DataMatrix = inst.x();
    let act = inst.activation();
    let mut rec = Recorder::new(config, inst.theta_star());
    for t in 0..=config.horizon {
        let i = t.min(config.horizon - 1);
        let row = x.row(i);
        let u = dot(row, &theta);
        let (s, ds) = act.eval(u);
        let loss = -inst.y()[i] * s;
        let measured = StepRecord::measure(t, &theta, inst.theta_star(), loss);
        let stop = check_target(&config.stop, &measured).or((t == config.horizon).then_some(Termination::Horizon));
        rec.record(t, &theta, loss, stop.is_some());
        if let Some(reason) = stop {
            return Ok(rec.finish(theta, reason));
        }
        let mut g = row.to_vec();
        let c = -inst.y()[i] * ds;
        g.iter_mut().for_each(|v| *v *= c);
        project_out(&mut g, &theta);
        axpy(-config.eta, &g, &mut theta);
        if normalize(&mut theta) == 0.0 || !all_finite(&theta) {
            return Err(diverged(t + 1, "iterate"));
        }
    }
    unreachable!("the loop returns at the horizon")
}

/// Dispatches on `config.method`.
pub fn run(inst: &Instance, config: &OptimizerConfig, seed: &SeedStream) -> Result<Trajectory> {
    match config.method {
        Method::SphericalGd => run_spherical_gd(inst, config, seed),
        Method::EuclideanGd => run_euclidean_gd(inst, config, seed),
        Method::OnlineSgd => run_online_sgd(inst, config, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::instance::{sample_instance, ThetaStarMode};

    fn inst(act: Activation, d: usize, n: usize, seed: u64) -> Instance {
        sample_instance(d, n, &act, &SeedStream::new(seed), ThetaStarMode::UniformSphere).unwrap()
    }

    #[test]
    fn method_round_trip() {
        for m in [Method::SphericalGd, Method::EuclideanGd, Method::OnlineSgd] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
    }

    #[test]
    fn validation_rejects_inconsistent_configs() {
        assert!(OptimizerConfig::spherical_gd(0.0, 10).validate().is_err());
        assert!(OptimizerConfig::spherical_gd(0.1, 0).validate().is_err());
        assert!(OptimizerConfig::spherical_gd(0.1, 10)
            .with_record_every(0)
            .validate()
            .is_err());
        assert!(OptimizerConfig::euclidean_gd(0.1, 10, 0.0).validate().is_err());
        let mut c = OptimizerConfig::spherical_gd(0.1, 10);
        c.loss = LossKind::Squared;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::online_sgd(0.1, 10);
        c.init = Init::Sphere(0.5);
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::euclidean_gd(0.1, 10, 0.1);
        c.loss = LossKind::Correlation;
        assert!(c.validate().is_err());
        let i = inst(Activation::quadratic(), 4, 8, 1);
        let c = OptimizerConfig::euclidean_gd(0.1, 10, 0.1);
        assert!(run_spherical_gd(&i, &c, &SeedStream::new(1)).is_err());
    }

    #[test]
    fn default_cadence() {
        assert_eq!(OptimizerConfig::spherical_gd(0.1, 100).record_cadence(), 1);
        assert_eq!(OptimizerConfig::spherical_gd(0.1, 10_000).record_cadence(), 5);
        assert_eq!(
            OptimizerConfig::spherical_gd(0.1, 10_000)
                .with_record_every(3)
                .record_cadence(),
            3
        );
    }

    #[test]
    fn online_sgd_rejects_data_reuse() {
        let i = inst(Activation::quadratic(), 5, 10, 2);
        let err = run_online_sgd(&i, &OptimizerConfig::online_sgd(0.1, 11), &SeedStream::new(2)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn online_sgd_single_sample_single_update() {
        let i = inst(Activation::hard_trunc(8.0).unwrap(), 6, 1, 3);
        let seed = SeedStream::new(3);
        let cfg = OptimizerConfig::online_sgd(0.3, 1).with_iterates();
        let traj = run_online_sgd(&i, &cfg, &seed).unwrap();
        assert_eq!(traj.steps_taken(), 1);
        assert_eq!(traj.steps.len(), 2);

        let mut theta = initial_point(&i, &cfg, &seed).unwrap();
        let row = i.x().row(0);
        let (_, ds) = i.activation().eval(dot(row, &theta));
        let mut g: Vec<f64> = row.iter().map(|v| -i.y()[0] * ds * v).collect();
        project_out(&mut g, &theta);
        axpy(-0.3, &g, &mut theta);
        normalize(&mut theta);
        for (a, b) in traj.theta.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let i = inst(Activation::smooth_trunc(8.0).unwrap(), 16, 80, 4);
        let seed = SeedStream::new(9);
        for cfg in [
            OptimizerConfig::spherical_gd(0.1, 50),
            OptimizerConfig::euclidean_gd(0.01, 50, 1e-3),
            OptimizerConfig::online_sgd(0.05, 80),
        ] {
            assert_eq!(run(&i, &cfg, &seed).unwrap(), run(&i, &cfg, &seed).unwrap());
        }
    }

    #[test]
    fn records_initial_cadence_and_final_step() {
        let i = inst(Activation::quadratic(), 8, 40, 5);
        let traj = run(
            &i,
            &OptimizerConfig::spherical_gd(0.1, 23).with_record_every(5),
            &SeedStream::new(1),
        )
        .unwrap();
        let ts: Vec<usize> = traj.steps.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0, 5, 10, 15, 20, 23]);
        assert_eq!(traj.termination, Termination::Horizon);
    }

    #[test]
    fn spherical_gd_stays_on_sphere() {
        for act in [Activation::quadratic(), Activation::smooth_trunc(8.0).unwrap()] {
            let i = inst(act, 30, 120, 6);
            let traj = run(
                &i,
                &OptimizerConfig::spherical_gd(0.1, 300).with_record_every(1),
                &SeedStream::new(6),
            )
            .unwrap();
            for s in &traj.steps {
                assert!((s.norm - 1.0).abs() <= 1e-12, "{}", s.norm);
            }
        }
    }

    #[test]
    fn euclidean_gd_from_truth_does_not_move() {
        let i = inst(Activation::hard_trunc(8.0).unwrap(), 20, 200, 7);
        let traj = run_euclidean_gd_from(
            &i,
            &OptimizerConfig::euclidean_gd(0.01, 20, 0.1),
            i.theta_star().to_vec(),
        )
        .unwrap();
        for s in &traj.steps {
            assert_eq!(s.dist_sq, 0.0);
            assert_eq!(s.loss, 0.0);
        }
        assert_eq!(traj.theta, i.theta_star());
    }

    #[test]
    fn mirrored_start_gives_mirrored_run() {
        let i = inst(Activation::hard_trunc(8.0).unwrap(), 12, 120, 8);
        let cfg = OptimizerConfig::euclidean_gd(0.01, 200, 1.0 / 144.0).with_iterates();
        let th0 = initial_point(&i, &cfg, &SeedStream::new(8)).unwrap();
        let neg: Vec<f64> = th0.iter().map(|v| -v).collect();
        let a = run_euclidean_gd_from(&i, &cfg, th0).unwrap();
        let b = run_euclidean_gd_from(&i, &cfg, neg).unwrap();
        assert_eq!(a.steps, b.steps);
        for (u, v) in a.iterates.unwrap().iter().zip(b.iterates.unwrap().iter()) {
            assert!(u.iter().zip(v).all(|(p, q)| *p == -*q));
        }

        let cfg = OptimizerConfig::spherical_gd(0.1, 100);
        let th0 = initial_point(&i, &cfg, &SeedStream::new(8)).unwrap();
        let neg: Vec<f64> = th0.iter().map(|v| -v).collect();
        let a = run_spherical_gd_from(&i, &cfg, th0).unwrap();
        let b = run_spherical_gd_from(&i, &cfg, neg).unwrap();
        assert!(a.theta.iter().zip(&b.theta).all(|(p, q)| *p == -*q));
    }

    #[test]
    fn stop_rules_fire() {
        let i = inst(Activation::hard_trunc(8.0).unwrap(), 16, 160, 9);
        let cfg = OptimizerConfig::euclidean_gd(0.1 / 64.0, 100_000, 1.0 / 256.0).with_stop(StopRule {
            target_dist_sq: Some(1e-6),
            ..Default::default()
        });
        let traj = run(&i, &cfg, &SeedStream::new(9)).unwrap();
        assert_eq!(traj.termination, Termination::TargetDistance);
        assert!(traj.last().dist_sq <= 1e-6);

        let cfg = OptimizerConfig::spherical_gd(0.1, 100_000).with_stop(StopRule {
            target_sq_overlap: Some(0.5),
            ..Default::default()
        });
        let traj = run(&i, &cfg, &SeedStream::new(9)).unwrap();
        assert_eq!(traj.termination, Termination::TargetOverlap);
        assert!(traj.last().sq_overlap >= 0.5);

        let cfg = OptimizerConfig::spherical_gd(0.1, 100_000).with_stop(StopRule {
            stall_window: Some(5),
            ..Default::default()
        });
        let traj = run(&inst(Activation::quadratic(), 8, 200, 10), &cfg, &SeedStream::new(1)).unwrap();
        assert_eq!(traj.termination, Termination::Stalled);
    }

    #[test]
    fn stall_detector_needs_consecutive_hits() {
        let mut s = StallDetector::new(Some(2));
        assert!(!s.push(1.0));
        assert!(!s.push(2.0));
        assert!(!s.push(1.0));
        assert!(s.push(2.0));
        let mut s = StallDetector::new(None);
        assert!((0..10).all(|_| !s.push(0.0)));
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let i = inst(Activation::quadratic(), 10, 100, 11);
        let err = run(&i, &OptimizerConfig::euclidean_gd(10.0, 1000, 1.0), &SeedStream::new(1)).unwrap_err();
        assert!(matches!(err, Error::Diverged { step, .. } if step > 0), "{err:?}");
    }
}
