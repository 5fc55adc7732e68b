//! The `sil` command line. Flags mirror [`SweepConfig`] keys; every command
//! that samples data requires `--seed`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sil_core::diagnostics::{geometric_rate_fit, one_point_convexity, phase_times};
use sil_core::optim::{run, Method};
use sil_core::spectral::{
    asymptotic_fixed_points, indicator_mass, moment_coefficients, psd_ordering_check, top2_eigs,
    trajectory_spectral_audit, Prediction, SpectralReport, SpikedOperator, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use sil_core::{sample_instance, sample_sphere, Activation, ActivationKind, SeedStream, ThetaStarMode};

use crate::config::{sample_count, trial_seed, SweepConfig};
use crate::error::{config, io_err, Error, Result};
use crate::fit::{threshold_fit, time_fit, FitKind, ThresholdFit};
use crate::output;
use crate::sweep::{run_sweep, run_trial, VERSION};

#[derive(Parser, Debug)]
#[command(name = "sil", version, about = "Single-index model recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trial and write its full trajectory.
    Trial {
        #[command(flatten)]
        grid: GridArgs,
        /// Seed index within the (d, δ) cell.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run every (d, δ, seed) trial of a grid.
    Sweep {
        /// `key = value` file; flags given on the command line override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Top two eigenpairs of A⋆, D_n or A(θ) with finite-size and
    /// proportional-limit predictions.
    Spectral(SpectralArgs),
    /// Solve the proportional-limit fixed-point equations.
    Asymptotics {
        #[arg(long = "M", default_value_t = 8.0)]
        m: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value = "hard_trunc")]
        activation: ActivationKind,
    },
    /// Threshold (δ⋆) or time (T⋆) fits against ln d from stored sweep output.
    Fit {
        #[arg(long)]
        kind: FitKind,
        /// summary.csv for threshold fits, curves.csv for time fits.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated squared-overlap levels.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        targets: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral audit of one trajectory plus phase-time, rate and convexity
    /// diagnostics.
    Audit {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Audit every k-th recorded iterate (the terminal one is always audited).
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
}

/// Config overrides. Each present flag is applied with [`SweepConfig::set`].
#[derive(Args, Debug, Default)]
struct GridArgs {
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long = "M")]
    m: Option<String>,
    /// Dimension(s), comma-separated for sweeps.
    #[arg(long)]
    d: Option<String>,
    /// Sample ratio(s) n/d, comma-separated for sweeps.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, alias = "T")]
    horizon: Option<String>,
    #[arg(long)]
    r0: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    target_sq_overlap: Option<String>,
    #[arg(long)]
    target_dist_sq: Option<String>,
    #[arg(long)]
    grad_tol: Option<String>,
    #[arg(long)]
    stall_window: Option<String>,
    #[arg(long)]
    phi_target: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Root seed.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    trajectories: Option<String>,
}

impl GridArgs {
    fn apply(&self, cfg: &mut SweepConfig) -> Result<()> {
        let pairs = [
            ("method", &self.method),
            ("activation", &self.activation),
            ("M", &self.m),
            ("d", &self.d),
            ("delta", &self.delta),
            ("seeds", &self.seeds),
            ("eta", &self.eta),
            ("horizon", &self.horizon),
            ("r0", &self.r0),
            ("record_every", &self.record_every),
            ("target_sq_overlap", &self.target_sq_overlap),
            ("target_dist_sq", &self.target_dist_sq),
            ("grad_tol", &self.grad_tol),
            ("stall_window", &self.stall_window),
            ("phi_target", &self.phi_target),
            ("eps", &self.eps),
            ("seed", &self.seed),
            ("out", &self.out),
            ("threads", &self.threads),
            ("trajectories", &self.trajectories),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(())
    }

    /// A config for exactly one (d, δ) cell.
    fn single_cell(&self) -> Result<SweepConfig> {
        let mut cfg = SweepConfig::default();
        self.apply(&mut cfg)?;
        if cfg.ds.len() != 1 || cfg.deltas.len() != 1 {
            return config("this command takes exactly one --d and one --delta");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OperatorChoice {
    AStar,
    DN,
    ATheta,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[arg(long, value_enum, default_value = "a-star")]
    operator: OperatorChoice,
    #[arg(long, default_value = "hard_trunc")]
    activation: ActivationKind,
    #[arg(long = "M", default_value_t = 8.0)]
    m: f64,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    seed: u64,
    /// Radius of the random θ used for A(θ).
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Trial { grid, index } => trial(&grid, index),
        Command::Sweep { config, grid } => sweep(config.as_deref(), &grid),
        Command::Spectral(args) => spectral(&args),
        Command::Asymptotics { m, delta, activation } => asymptotics(m, delta, activation),
        Command::Fit {
            kind,
            input,
            targets,
            out,
        } => fit(kind, &input, &targets, out.as_deref()),
        Command::Audit { grid, index, stride } => audit(&grid, index, stride),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn or_unreached<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "unreached".to_string(), |x| x.to_string())
}

fn trial(grid: &GridArgs, index: usize) -> Result<()> {
    let mut cfg = grid.single_cell()?;
    cfg.activation = Some(cfg.activation_kind());
    let (d, delta) = (cfg.ds[0], cfg.deltas[0]);
    let t = run_trial(&cfg, d, delta, index)?;
    let r = &t.record;
    if let Some(e) = &r.error {
        return Err(Error::Config(format!("trial failed: {e}")));
    }
    println!("method = {}", r.method);
    println!("d = {d}, delta = {delta}, n = {}, trial_seed = {}", r.n, r.trial_seed);
    println!("sq_overlap = {}", output::fmt_f64(r.sq_overlap.unwrap_or(f64::NAN)));
    println!(
        "t_angle = {}, t_norm = {}, t_dist = {}",
        or_unreached(r.t_angle),
        or_unreached(r.t_norm),
        or_unreached(r.t_dist)
    );
    println!(
        "steps = {}, termination = {}",
        or_unreached(r.steps),
        r.termination.as_deref().unwrap_or("")
    );
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        let name = output::trajectory_file_name(cfg.method, d, delta, cfg.m_label(), index);
        let path = dir.join(name);
        output::write_trajectory(&path, &t.steps)?;
        output::write_trials(&dir.join(output::TRIALS_FILE), std::slice::from_ref(r))?;
        output::write_json_line(
            &dir.join("trial.jsonl"),
            &json!({ "version": VERSION, "root_seed": cfg.seed, "index": index, "config": cfg }),
        )?;
        println!("trajectory = {}", path.display());
    }
    Ok(())
}

fn sweep(file: Option<&Path>, grid: &GridArgs) -> Result<()> {
    let mut cfg = match file {
        Some(p) => SweepConfig::from_file(p)?,
        None => SweepConfig::default(),
    };
    grid.apply(&mut cfg)?;
    let outcome = run_sweep(&cfg)?;
    println!("method,d,delta,M,seeds,mean_sq_overlap,std_sq_overlap,failures");
    for c in &outcome.cells {
        println!(
            "{},{},{},{},{},{},{},{}",
            c.method,
            c.d,
            output::fmt_f64(c.delta),
            output::fmt_f64(c.m),
            c.seeds,
            c.mean_sq_overlap.map_or_else(String::new, output::fmt_f64),
            c.std_sq_overlap.map_or_else(String::new, output::fmt_f64),
            c.failures
        );
    }
    Ok(())
}

fn report_json(r: &SpectralReport) -> serde_json::Value {
    json!({
        "lambda1": r.lambda1,
        "lambda2": r.lambda2,
        "gap": r.gap(),
        "overlap": r.overlap,
        "residuals": r.residuals,
        "iterations": r.iterations,
    })
}

fn print_report(r: &SpectralReport) {
    println!("lambda1 = {}", r.lambda1);
    println!("lambda2 = {}", r.lambda2);
    println!("gap = {}", r.gap());
    if let Some(o) = r.overlap {
        println!("overlap = {o}");
        println!("sq_overlap = {}", o * o);
    }
    println!("residuals = {:e}, {:e}", r.residuals[0], r.residuals[1]);
    println!("iterations = {}", r.iterations);
}

fn spectral(args: &SpectralArgs) -> Result<()> {
    let act = Activation::new(args.activation, args.m)?;
    let n = sample_count(args.d, args.delta);
    let root = SeedStream::new(args.seed);
    let inst = sample_instance(args.d, n, &act, &root.purpose("instance"), ThetaStarMode::UniformSphere)?;
    // Eigenvalue scale relative to D_n: A⋆ = 2·D_n.
    let (op, scale) = match args.operator {
        OperatorChoice::AStar => (SpikedOperator::a_star(&inst), Some(2.0)),
        OperatorChoice::DN => (SpikedOperator::d_n(&inst), Some(1.0)),
        OperatorChoice::ATheta => {
            let theta = sample_sphere(args.d, args.radius, &root.purpose("theta"))?;
            (SpikedOperator::a_theta(&inst, &theta)?, None)
        }
    };
    let report = top2_eigs(&op, args.tol, DEFAULT_MAX_ITERS, root.purpose("lanczos").root())?;
    println!("operator = {:?}, d = {}, n = {n}", args.operator, args.d);
    print_report(&report);

    let mut record = json!({
        "version": VERSION,
        "root_seed": args.seed,
        "operator": format!("{:?}", args.operator),
        "activation": args.activation.as_str(),
        "M": args.m,
        "d": args.d,
        "delta": args.delta,
        "report": report_json(&report),
    });
    if let Some(scale) = scale {
        let (c1, c2) = moment_coefficients(&act);
        let law = Prediction {
            lambda1: scale * c1,
            lambda2: scale * c2,
            sq_overlap: 1.0,
        };
        println!("moment_law = lambda1 {}, lambda2 {}", law.lambda1, law.lambda2);
        record["moment_law"] = json!({ "lambda1": law.lambda1, "lambda2": law.lambda2 });
        match asymptotic_fixed_points(&act, args.delta) {
            Ok(p) => {
                let pred = p.scaled(scale);
                println!(
                    "fixed_point = lambda1 {}, lambda2 {}, sq_overlap {}",
                    pred.lambda1, pred.lambda2, pred.sq_overlap
                );
                let rep = report.clone().with_prediction(pred.clone());
                if let Some((g1, g2, g3)) = rep.prediction_gaps() {
                    println!("measured_minus_predicted = {g1}, {g2}, {g3}");
                }
                record["fixed_point"] =
                    json!({ "lambda1": pred.lambda1, "lambda2": pred.lambda2, "sq_overlap": pred.sq_overlap });
            }
            Err(e) => println!("fixed_point = unavailable ({e})"),
        }
    }
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        output::write_json_line(&dir.join("spectral.jsonl"), &record)?;
    }
    Ok(())
}

fn asymptotics(m: f64, delta: f64, kind: ActivationKind) -> Result<()> {
    let act = Activation::new(kind, m)?;
    let p = asymptotic_fixed_points(&act, delta)?;
    println!("activation = {}, M = {m}, delta = {delta}", kind.as_str());
    println!("lambda_star = {}", p.lambda_star);
    println!("lambda_bar = {}", p.lambda_bar);
    println!("lambda1(D_n) = {}", p.lambda1);
    println!("lambda2(D_n) = {}", p.lambda2);
    println!("sq_overlap = {}", p.sq_overlap);
    Ok(())
}

fn fit(kind: FitKind, input: &Path, targets: &[f64], out: Option<&Path>) -> Result<()> {
    let fit: ThresholdFit = match kind {
        FitKind::Threshold => threshold_fit(&output::read_summaries(input)?, targets)?,
        FitKind::Time => time_fit(&output::read_curves(input)?, targets)?,
    };
    println!("kind,target,slope,intercept,r2,points");
    for l in &fit.lines {
        println!("{kind},{},{},{},{},{}", l.target, l.slope, l.intercept, l.r2, l.points);
    }
    for u in &fit.unfittable {
        match u.d {
            Some(d) => eprintln!("unfittable: target {} at d = {d}: {}", u.target, u.reason),
            None => eprintln!("unfittable: target {}: {}", u.target, u.reason),
        }
    }
    if !fit.non_monotone.is_empty() {
        eprintln!("thresholds not monotone in the target at d = {:?}", fit.non_monotone);
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let (points, lines) = output::fit_file_names(kind);
        output::write_fit(&dir.join(points), &dir.join(lines), &fit)?;
    }
    Ok(())
}

fn audit(grid: &GridArgs, index: usize, stride: usize) -> Result<()> {
    let mut cfg = grid.single_cell()?;
    cfg.activation = Some(cfg.activation_kind());
    let (d, delta) = (cfg.ds[0], cfg.deltas[0]);
    let n = sample_count(d, delta);
    let act = cfg.activation()?;
    let seed = SeedStream::new(trial_seed(cfg.root_seed()?, d, delta, cfg.method, index));
    let inst = sample_instance(d, n, &act, &seed, ThetaStarMode::UniformSphere)?;
    let opt = cfg.optimizer(d, n).with_iterates();
    let traj = run(&inst, &opt, &seed)?;
    let audit = trajectory_spectral_audit(&inst, &traj, stride)?;
    let times = phase_times(&traj, d, opt.eta, cfg.phi_target, cfg.eps);
    let last = traj.last();
    let theta = &traj.theta;

    println!("method = {}, d = {d}, delta = {delta}, n = {n}", cfg.method);
    println!("sq_overlap = {}", last.sq_overlap);
    println!(
        "t_angle = {}, t_norm = {}, t_dist = {}, predicted_t_angle = {:.3}",
        or_unreached(times.t_angle),
        or_unreached(times.t_norm),
        or_unreached(times.t_dist),
        times.predicted_t_angle
    );
    let flagged = audit.iter().filter(|p| p.flagged).count();
    println!("audited = {}, flagged = {flagged}", audit.len());
    if act.kind() != ActivationKind::Quadratic {
        println!("indicator_mass = {}", indicator_mass(&inst, theta, act.m())?);
        println!("psd_ordering_min = {}", psd_ordering_check(&inst, theta, 16)?);
    }
    if cfg.method == Method::EuclideanGd {
        println!("one_point_convexity = {}", one_point_convexity(&inst, theta)?);
        match geometric_rate_fit(&traj, 0.5, opt.eta) {
            Ok(f) => println!("rate_alpha = {}, rate_r2 = {}", f.alpha, f.r2),
            Err(e) => println!("rate_fit = unavailable ({e})"),
        }
    }
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
        output::write_audit(&dir.join(output::AUDIT_FILE), &audit)?;
        output::write_trajectory(&dir.join("audit_trajectory.csv"), &traj.steps)?;
    }
    Ok(())
}
