//! Sweep configuration: a grid over (d, δ), an optimizer template and the
//! output settings. Read from flat `key = value` text and overridable field by
//! field from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sil_core::optim::{Method, OptimizerConfig, StopRule};
use sil_core::rng::{hash_tag, hash_words};
use sil_core::{Activation, ActivationKind};

use crate::error::{config, io_err, Error, Result};

pub const ENV_THREADS: &str = "SIL_THREADS";
pub const EUCLIDEAN_HORIZON_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    #[serde(serialize_with = "as_str")]
    pub method: Method,
    /// Defaults to hard_trunc for euclidean_gd and smooth_trunc otherwise.
    #[serde(serialize_with = "opt_as_str")]
    pub activation: Option<ActivationKind>,
    /// Truncation level; ignored for the quadratic link.
    pub m: f64,
    pub ds: Vec<usize>,
    pub deltas: Vec<f64>,
    pub seeds: usize,
    /// Defaults: 0.1 (spherical), 0.1/M² (Euclidean), 0.5/d (online).
    pub eta: Option<f64>,
    /// Defaults: ceil(1000 ln² d) (spherical), min(ceil(200 ln d/η), 10⁶)
    /// (Euclidean), n (online).
    pub horizon: Option<usize>,
    /// Euclidean initial radius; defaults to 1/d².
    pub r0: Option<f64>,
    pub record_every: Option<usize>,
    pub target_sq_overlap: Option<f64>,
    pub target_dist_sq: Option<f64>,
    pub grad_tol: Option<f64>,
    pub stall_window: Option<usize>,
    /// Angle threshold (radians) for the t_angle phase time.
    pub phi_target: f64,
    /// Distance² threshold for the t_dist phase time.
    pub eps: f64,
    /// Root seed; required.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads; `SIL_THREADS` takes precedence.
    pub threads: Option<usize>,
    /// Write one trajectory CSV per trial.
    pub trajectories: bool,
}

fn as_str<S: serde::Serializer, T: ToString>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn opt_as_str<S: serde::Serializer, T: ToString>(v: &Option<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_str(&v.to_string()),
        None => s.serialize_none(),
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            method: Method::SphericalGd,
            activation: None,
            m: 8.0,
            ds: Vec::new(),
            deltas: Vec::new(),
            seeds: 1,
            eta: None,
            horizon: None,
            r0: None,
            record_every: None,
            target_sq_overlap: None,
            target_dist_sq: None,
            grad_tol: None,
            stall_window: None,
            phi_target: 0.3,
            eps: 1e-8,
            seed: None,
            out: None,
            threads: None,
            trajectories: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        v => config(format!("cannot parse `{v}` for `{key}` (expected true or false)")),
    }
}

/// n = round(δ·d).
pub fn sample_count(d: usize, delta: f64) -> usize {
    (delta * d as f64).round() as usize
}

/// ceil(1000 ln² d).
pub fn default_spherical_horizon(d: usize) -> usize {
    (1000.0 * (d as f64).ln().powi(2)).ceil() as usize
}

/// min(ceil(200 ln d/η), 10⁶).
pub fn default_euclidean_horizon(d: usize, eta: f64) -> usize {
    ((200.0 * (d as f64).ln() / eta).ceil() as usize).min(EUCLIDEAN_HORIZON_CAP)
}

/// Seed of one trial: hash(root, d, δ, method, seed index). Adding cells to a
/// grid leaves every existing cell's trials unchanged.
pub fn trial_seed(root: u64, d: usize, delta: f64, method: Method, index: usize) -> u64 {
    hash_words(&[root, d as u64, delta.to_bits(), hash_tag(method.as_str()), index as u64])
}

impl SweepConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "method" => self.method = v.parse()?,
            "activation" => self.activation = Some(v.parse()?),
            "M" | "m" => self.m = parse(key, v)?,
            "d" => self.ds = parse_list(key, v)?,
            "delta" => self.deltas = parse_list(key, v)?,
            "seeds" => self.seeds = parse(key, v)?,
            "eta" => self.eta = parse_opt(key, v)?,
            "horizon" | "T" => self.horizon = parse_opt(key, v)?,
            "r0" => self.r0 = parse_opt(key, v)?,
            "record_every" => self.record_every = parse_opt(key, v)?,
            "target_sq_overlap" => self.target_sq_overlap = parse_opt(key, v)?,
            "target_dist_sq" => self.target_dist_sq = parse_opt(key, v)?,
            "grad_tol" => self.grad_tol = parse_opt(key, v)?,
            "stall_window" => self.stall_window = parse_opt(key, v)?,
            "phi_target" => self.phi_target = parse(key, v)?,
            "eps" => self.eps = parse(key, v)?,
            "seed" => self.seed = parse_opt(key, v)?,
            "out" => self.out = (!v.is_empty()).then(|| PathBuf::from(v)),
            "threads" => self.threads = parse_opt(key, v)?,
            "trajectories" => self.trajectories = parse_bool(key, v)?,
            other => return config(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: k + 1,
                    detail: format!("expected `key = value`, got `{line}`"),
                });
            };
            cfg.set(key, value).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: k + 1,
                detail: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_text(&text, path)
    }

    pub fn activation_kind(&self) -> ActivationKind {
        self.activation.unwrap_or(match self.method {
            Method::EuclideanGd => ActivationKind::HardTrunc,
            Method::SphericalGd | Method::OnlineSgd => ActivationKind::SmoothTrunc,
        })
    }

    pub fn activation(&self) -> Result<Activation> {
        Ok(Activation::new(self.activation_kind(), self.m)?)
    }

    /// M as it appears in output: infinite for the quadratic link.
    pub fn m_label(&self) -> f64 {
        if self.activation_kind() == ActivationKind::Quadratic {
            f64::INFINITY
        } else {
            self.m
        }
    }

    pub fn root_seed(&self) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => config("a root seed is required (`seed`)"),
        }
    }

    /// Worker count: `SIL_THREADS`, then `threads`, then all cores.
    pub fn thread_count(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(ENV_THREADS) {
            return match v.trim().parse::<usize>() {
                Ok(k) if k > 0 => Ok(k),
                _ => config(format!("{ENV_THREADS} must be a positive integer, got `{v}`")),
            };
        }
        match self.threads {
            Some(0) => config("threads must be positive"),
            Some(k) => Ok(k),
            None => Ok(std::thread::available_parallelism().map_or(1, |k| k.get())),
        }
    }

    /// Optimizer settings for one cell.
    pub fn optimizer(&self, d: usize, n: usize) -> OptimizerConfig {
        let stop = StopRule {
            target_sq_overlap: self.target_sq_overlap,
            target_dist_sq: self.target_dist_sq,
            grad_tol: self.grad_tol,
            stall_window: self.stall_window,
        };
        let mut cfg = match self.method {
            Method::SphericalGd => {
                let eta = self.eta.unwrap_or(0.1);
                OptimizerConfig::spherical_gd(eta, self.horizon.unwrap_or_else(|| default_spherical_horizon(d)))
            }
            Method::EuclideanGd => {
                let eta = self.eta.unwrap_or(0.1 / (self.m * self.m));
                let horizon = self.horizon.unwrap_or_else(|| default_euclidean_horizon(d, eta));
                OptimizerConfig::euclidean_gd(eta, horizon, self.r0.unwrap_or(1.0 / (d * d) as f64))
            }
            Method::OnlineSgd => OptimizerConfig::online_sgd(
                self.eta.unwrap_or_else(|| OptimizerConfig::default_online_eta(d)),
                self.horizon.unwrap_or(n),
            ),
        }
        .with_stop(stop);
        cfg.record_every = self.record_every;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.root_seed()?;
        if self.ds.is_empty() || self.deltas.is_empty() {
            return config("the grid needs at least one d and one δ");
        }
        if let Some(&d) = self.ds.iter().find(|&&d| d < 2) {
            return config(format!("every d must be at least 2, got {d}"));
        }
        if let Some(&x) = self.deltas.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return config(format!("every δ must be positive, got {x}"));
        }
        if self.seeds == 0 {
            return config("seeds must be positive");
        }
        if self.activation_kind() != ActivationKind::Quadratic && !(self.m > 0.0 && self.m.is_finite()) {
            return config(format!("M must be positive, got {}", self.m));
        }
        if !(self.phi_target >= 0.0) || !(self.eps > 0.0) {
            return config("phi_target must be non-negative and eps positive");
        }
        for &d in &self.ds {
            for &delta in &self.deltas {
                let n = sample_count(d, delta);
                if n == 0 {
                    return config(format!("δ = {delta} gives no samples at d = {d}"));
                }
                let opt = self.optimizer(d, n);
                opt.validate()
                    .map_err(|e| Error::Config(format!("cell d = {d}, δ = {delta}: {e}")))?;
                if self.method == Method::OnlineSgd && opt.horizon > n {
                    return config(format!(
                        "online_sgd uses each sample once, but horizon {} exceeds n = {n} at d = {d}, δ = {delta}",
                        opt.horizon
                    ));
                }
            }
        }
        self.activation()?;
        self.thread_count()?;
        Ok(())
    }
}
