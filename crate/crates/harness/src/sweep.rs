//! Parallel execution of a (d, δ, seed) grid and per-cell aggregation.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sil_core::diagnostics::phase_times;
use sil_core::optim::{run, Method, StepRecord, Trajectory};
use sil_core::{sample_instance, SeedStream, ThetaStarMode};

use crate::config::{sample_count, trial_seed, SweepConfig};
use crate::error::{io_err, Error, Result};
use crate::output;

/// Version string recorded in sweep sidecars.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub d: usize,
    pub delta: f64,
    /// Infinite for the quadratic link.
    pub m: f64,
    /// Seed index within the cell.
    pub seed: usize,
    pub n: usize,
    pub trial_seed: u64,
    /// Terminal values; `None` when the trial failed.
    pub sq_overlap: Option<f64>,
    pub overlap: Option<f64>,
    pub t_angle: Option<usize>,
    pub t_norm: Option<usize>,
    pub t_dist: Option<usize>,
    pub steps: Option<usize>,
    pub termination: Option<String>,
    pub error: Option<String>,
}

/// One finished trial with its recorded steps (empty on failure).
#[derive(Clone, Debug)]
pub struct TrialOutput {
    pub record: TrialRecord,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    pub d: usize,
    pub delta: f64,
    pub m: f64,
    /// Declared seed count, failures included.
    pub seeds: usize,
    /// Statistics over the successful trials; `None` when every trial failed.
    pub mean_sq_overlap: Option<f64>,
    pub std_sq_overlap: Option<f64>,
    /// Means over the trials that reached the threshold.
    pub mean_t_angle: Option<f64>,
    pub mean_t_norm: Option<f64>,
    pub failures: usize,
}

/// Mean squared overlap of a cell at step t, each trial contributing its last
/// recorded value at or before t (trials that stopped early hold their final
/// value).
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub method: Method,
    pub d: usize,
    pub delta: f64,
    pub m: f64,
    pub t: usize,
    pub mean_sq_overlap: f64,
    pub mean_norm: f64,
    pub trials: usize,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialOutput>,
    pub curves: Vec<CurvePoint>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<TrialRecord> {
        self.trials.iter().map(|t| t.record.clone()).collect()
    }

    pub fn cell(&self, d: usize, delta: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.d == d && c.delta == delta)
    }
}

/// Runs trial `index` of cell (d, δ). Numerical failures are recorded in the
/// returned record rather than raised.
pub fn run_trial(cfg: &SweepConfig, d: usize, delta: f64, index: usize) -> Result<TrialOutput> {
    let root = cfg.root_seed()?;
    let act = cfg.activation()?;
    let n = sample_count(d, delta);
    let ts = trial_seed(root, d, delta, cfg.method, index);
    let opt = cfg.optimizer(d, n);
    let mut record = TrialRecord {
        method: cfg.method,
        d,
        delta,
        m: cfg.m_label(),
        seed: index,
        n,
        trial_seed: ts,
        sq_overlap: None,
        overlap: None,
        t_angle: None,
        t_norm: None,
        t_dist: None,
        steps: None,
        termination: None,
        error: None,
    };
    let seed = SeedStream::new(ts);
    let result: sil_core::Result<Trajectory> =
        sample_instance(d, n, &act, &seed, ThetaStarMode::UniformSphere).and_then(|inst| run(&inst, &opt, &seed));
    match result {
        Ok(traj) => {
            let p = phase_times(&traj, d, opt.eta, cfg.phi_target, cfg.eps);
            let last = traj.last();
            record.sq_overlap = Some(last.sq_overlap);
            record.overlap = Some(last.overlap);
            record.t_angle = p.t_angle;
            record.t_norm = p.t_norm;
            record.t_dist = p.t_dist;
            record.steps = Some(traj.steps_taken());
            record.termination = Some(traj.termination.as_str().to_string());
            Ok(TrialOutput {
                record,
                steps: traj.steps,
            })
        }
        Err(e) => {
            record.error = Some(e.to_string());
            Ok(TrialOutput {
                record,
                steps: Vec::new(),
            })
        }
    }
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Per-cell statistics. `trials` must be grouped by cell.
pub fn summarize(trials: &[TrialRecord], seeds: usize) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for group in trials.chunk_by(|a, b| a.d == b.d && a.delta == b.delta && a.method == b.method) {
        let first = &group[0];
        let sq: Vec<f64> = group.iter().filter_map(|r| r.sq_overlap).collect();
        let ta: Vec<f64> = group.iter().filter_map(|r| r.t_angle.map(|t| t as f64)).collect();
        let tn: Vec<f64> = group.iter().filter_map(|r| r.t_norm.map(|t| t as f64)).collect();
        let (mean_sq, std_sq) = mean_std(&sq);
        cells.push(CellSummary {
            method: first.method,
            d: first.d,
            delta: first.delta,
            m: first.m,
            seeds,
            mean_sq_overlap: mean_sq,
            std_sq_overlap: std_sq,
            mean_t_angle: mean_std(&ta).0,
            mean_t_norm: mean_std(&tn).0,
            failures: group.iter().filter(|r| r.error.is_some()).count(),
        });
    }
    cells
}

/// Mean (squared overlap, norm) curve of one cell on the union of recorded
/// steps. Empty trajectories (failed trials) are skipped.
pub fn mean_curve(trajectories: &[&[StepRecord]]) -> Vec<(usize, f64, f64)> {
    let runs: Vec<&[StepRecord]> = trajectories.iter().copied().filter(|s| !s.is_empty()).collect();
    if runs.is_empty() {
        return Vec::new();
    }
    let mut times: Vec<usize> = runs.iter().flat_map(|s| s.iter().map(|r| r.t)).collect();
    times.sort_unstable();
    times.dedup();
    let mut cursor = vec![0usize; runs.len()];
    times
        .into_iter()
        .map(|t| {
            let (mut sq, mut norm) = (0.0, 0.0);
            for (run, c) in runs.iter().zip(cursor.iter_mut()) {
                while *c + 1 < run.len() && run[*c + 1].t <= t {
                    *c += 1;
                }
                sq += run[*c].sq_overlap;
                norm += run[*c].norm;
            }
            let k = runs.len() as f64;
            (t, sq / k, norm / k)
        })
        .collect()
}

fn curves_for(trials: &[TrialOutput]) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for group in trials.chunk_by(|a, b| a.record.d == b.record.d && a.record.delta == b.record.delta) {
        let r = &group[0].record;
        let steps: Vec<&[StepRecord]> = group.iter().map(|t| t.steps.as_slice()).collect();
        let used = steps.iter().filter(|s| !s.is_empty()).count();
        out.extend(mean_curve(&steps).into_iter().map(|(t, v, norm)| CurvePoint {
            method: r.method,
            d: r.d,
            delta: r.delta,
            m: r.m,
            t,
            mean_sq_overlap: v,
            mean_norm: norm,
            trials: used,
        }));
    }
    out
}

/// Runs every (cell, seed) trial exactly once on a pool of
/// `cfg.thread_count()` workers. With an output directory, writes
/// `trials.csv`, `summary.csv`, `curves.csv`, the `sweep.jsonl` sidecar and
/// (optionally) one trajectory CSV per trial; a `PARTIAL` marker exists
/// until all of them are written.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut resolved = cfg.clone();
    resolved.activation = Some(cfg.activation_kind());
    let cfg = &resolved;

    let out = cfg.out.as_deref();
    let traj_dir = out.map(|o| o.join(output::TRAJECTORY_DIR));
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(io_err(o))?;
        let marker = o.join(output::PARTIAL_MARKER);
        fs::write(&marker, "sweep in progress\n").map_err(io_err(&marker))?;
        if cfg.trajectories {
            let dir = traj_dir.as_deref().expect("set with out");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }

    let mut tasks: Vec<(usize, f64, usize)> = Vec::new();
    for &d in &cfg.ds {
        for &delta in &cfg.deltas {
            tasks.extend((0..cfg.seeds).map(|s| (d, delta, s)));
        }
    }
    tasks.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    tasks.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.thread_count()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialOutput> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(d, delta, s)| {
                let t = run_trial(cfg, d, delta, s)?;
                if let (Some(dir), true) = (traj_dir.as_deref(), cfg.trajectories) {
                    if t.record.error.is_none() {
                        let name = output::trajectory_file_name(cfg.method, d, delta, cfg.m_label(), s);
                        output::write_trajectory(&dir.join(name), &t.steps)?;
                    }
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let records: Vec<TrialRecord> = trials.iter().map(|t| t.record.clone()).collect();
    let cells = summarize(&records, cfg.seeds);
    let curves = curves_for(&trials);

    if let Some(o) = out {
        output::write_trials(&o.join(output::TRIALS_FILE), &records)?;
        output::write_summaries(&o.join(output::SUMMARY_FILE), &cells)?;
        output::write_curves(&o.join(output::CURVES_FILE), &curves)?;
        write_sidecar(&o.join(output::SIDECAR_FILE), cfg, &records)?;
        let marker = o.join(output::PARTIAL_MARKER);
        fs::remove_file(&marker).map_err(io_err(&marker))?;
    }
    Ok(SweepOutcome { cells, trials, curves })
}

fn write_sidecar(path: &Path, cfg: &SweepConfig, records: &[TrialRecord]) -> Result<()> {
    let value = serde_json::json!({
        "version": VERSION,
        "root_seed": cfg.seed,
        "config": cfg,
        "trials": records.len(),
        "failures": records.iter().filter(|r| r.error.is_some()).count(),
    });
    output::write_json_line(path, &value)
}
