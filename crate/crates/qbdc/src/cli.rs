use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qbdc_core::invariant::{falloff_fit, solve_invariant_cesaro, solve_invariant_direct, DEFAULT_TOL};
use qbdc_core::{
    build_drift_certificate, convergence_trace, search_lyapunov_certificate, toy_conserved_observable, verify_drift,
    DensityMatrix, Error as CoreError, MaserParams,
};

use crate::analysis;
use crate::config::{Model, ModelConfig, ThetaConfig};
use crate::error::AppError;
use crate::export;

/// Depth of the `(t, r)` grid searched for Lyapunov certificates.
const SEARCH_DEPTH: u32 = 12;
const CESARO_MAX_ITER: usize = 1 << 20;

#[derive(Debug, Parser)]
#[command(name = "qbdc", version, about = "Invariant states of quantum birth-and-death channels")]
pub struct Cli {
    /// Model JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Truncation dimension, overriding the config.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.25)]
    pub tail_fraction: f64,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Lyapunov,
    Drift,
    ToyObservable,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition rates as CSV.
    Rates,
    /// Verdict for the configured point.
    Classify,
    /// Verdicts over the configured grid: CSV, JSON and SVG.
    Sweep,
    /// Build and verify a certificate.
    Certify {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Constant for the toy observable.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Number of observable coefficients.
        #[arg(long, default_value_t = 40)]
        k_max: usize,
    },
    /// Invariant state and its diagonal falloff.
    Solve,
    /// Trace distance of iterates to the invariant state.
    Converge {
        /// `vacuum`, `number:N` or `mixed:M`; defaults to the config, then vacuum.
        #[arg(long)]
        theta: Option<ThetaConfig>,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
    },
}

struct Ctx {
    config: ModelConfig,
    out: Option<PathBuf>,
    dim: usize,
    tail: f64,
}

impl Ctx {
    fn emit(&self, name: &str, text: &str) -> Result<(), AppError> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(name), text)?;
            }
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    if !(cli.tail_fraction > 0.0 && cli.tail_fraction <= 1.0) {
        return Err(AppError::Config(format!("tail-fraction: {} is outside (0, 1]", cli.tail_fraction)));
    }
    let path = cli.config.as_deref().ok_or_else(|| AppError::Config("--config is required".into()))?;
    let config = ModelConfig::load(path)?;
    let dim = cli.dim.unwrap_or(config.dim);
    let ctx = Ctx { config, out: cli.out, dim, tail: cli.tail_fraction };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Rates => rates(&ctx),
        Command::Classify => classify(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Certify { mode, c, k_max } => certify(&ctx, mode, c, k_max),
        Command::Solve => solve(&ctx),
        Command::Converge { theta, n_max } => converge(&ctx, theta, n_max),
    }
}

fn rates(ctx: &Ctx) -> Result<(), AppError> {
    let model = ctx.config.model()?;
    let (r, rule) = analysis::rates(&model, ctx.dim)?;
    let mut buf = Vec::new();
    export::write_rates_csv(&mut buf, &r, rule.as_ref())?;
    ctx.emit("rates.csv", &String::from_utf8_lossy(&buf))
}

fn classify(ctx: &Ctx) -> Result<(), AppError> {
    let model = ctx.config.model()?;
    let v = analysis::classify(&model, ctx.dim, ctx.tail)?;
    let rec = export::VerdictRecord::new(&model, &v);
    let mut value = serde_json::to_value(&rec).expect("record serializes");
    value["tail_window"] = json!(v.tail_window.map(|(a, b)| [a, b]));
    ctx.emit("classify.json", &export::to_pretty(&value))?;
    if v.conflict {
        return Err(AppError::Conflict(format!("both criteria fire at lambda = {}", model.lambda())));
    }
    Ok(())
}

fn sweep(ctx: &Ctx) -> Result<(), AppError> {
    let records = crate::sweep::run(&ctx.config, ctx.dim, ctx.tail)?;
    let mut csv = Vec::new();
    export::write_verdicts_csv(&mut csv, &records)?;
    let svg = crate::svg::render(&records);
    let conflicts = records.iter().filter(|r| r.conflict).count();
    match &ctx.out {
        Some(_) => {
            ctx.emit("sweep.csv", &String::from_utf8_lossy(&csv))?;
            ctx.emit("sweep.json", &export::to_pretty(&serde_json::to_value(&records).expect("records serialize")))?;
            ctx.emit("sweep.svg", &svg)?;
        }
        None => ctx.emit("sweep.csv", &String::from_utf8_lossy(&csv))?,
    }
    if conflicts > 0 {
        return Err(AppError::Conflict(format!("{conflicts} grid points have conflicting verdicts")));
    }
    Ok(())
}

fn maser(model: &Model) -> Result<&MaserParams, AppError> {
    match model {
        Model::Maser(p) => Ok(p),
        Model::RandomTime { .. } => Err(AppError::Config("coupling: toy-observable needs a constant coupling".into())),
    }
}

fn certify(ctx: &Ctx, mode: Mode, c: f64, k_max: usize) -> Result<(), AppError> {
    let model = ctx.config.model()?;
    let value = match mode {
        Mode::ToyObservable => {
            let obs = toy_conserved_observable(maser(&model)?, c, k_max)?;
            export::toy_observable_json(&model, c, &obs)
        }
        Mode::Lyapunov | Mode::Drift => {
            let (channel, _) = analysis::channel(&model, ctx.dim)?;
            let rates = qbdc_core::extract_transition_rates(&channel)?;
            let cert = if mode == Mode::Lyapunov {
                let k = analysis::kappa(&model, &rates, ctx.tail)?;
                search_lyapunov_certificate(&channel, &rates, &k, SEARCH_DEPTH)?
            } else {
                verify_drift(&channel, &build_drift_certificate(&rates)?)?
            };
            export::certificate_json(&model, ctx.dim, &cert)
        }
    };
    ctx.emit("certificate.json", &export::to_pretty(&value))
}

/// Direct solve; Cesaro averaging only when the direct solve fails numerically.
fn invariant(ctx: &Ctx, model: &Model) -> Result<(DensityMatrix, &'static str), AppError> {
    let (channel, _) = analysis::channel(model, ctx.dim)?;
    match solve_invariant_direct(&channel, DEFAULT_TOL) {
        Ok(rho) => Ok((rho, "direct")),
        Err(CoreError::Singular(_) | CoreError::NotPositive(_)) => {
            let seed = DensityMatrix::vacuum(ctx.dim);
            Ok((solve_invariant_cesaro(&channel, &seed, CESARO_MAX_ITER, DEFAULT_TOL)?, "cesaro"))
        }
        Err(e) => Err(e.into()),
    }
}

fn solve(ctx: &Ctx) -> Result<(), AppError> {
    let model = ctx.config.model()?;
    let (rho, method) = invariant(ctx, &model)?;
    let mut value = export::state_json(&rho);
    value["method"] = json!(method);
    value["falloff"] = export::falloff_json(&falloff_fit(&rho));
    ctx.emit("state.json", &export::to_pretty(&value))
}

fn theta_state(theta: ThetaConfig, dim: usize) -> Result<DensityMatrix, AppError> {
    let mut w = vec![0.0; dim];
    match theta {
        ThetaConfig::Vacuum => w[0] = 1.0,
        ThetaConfig::Number { n } if n < dim => w[n] = 1.0,
        ThetaConfig::MaximallyMixed { support } if (1..=dim).contains(&support) => w[..support].fill(1.0),
        other => return Err(AppError::Config(format!("theta: {other:?} does not fit dimension {dim}"))),
    }
    Ok(DensityMatrix::from_diagonal(&w))
}

fn converge(ctx: &Ctx, theta: Option<ThetaConfig>, n_max: usize) -> Result<(), AppError> {
    let model = ctx.config.model()?;
    let theta = theta.or(ctx.config.theta).unwrap_or(ThetaConfig::Vacuum);
    let start = theta_state(theta, ctx.dim)?;
    let (phi, _) = invariant(ctx, &model)?;
    let (channel, _) = analysis::channel(&model, ctx.dim)?;
    let trace = convergence_trace(&channel, &start, &phi, n_max)?;
    let mut buf = Vec::new();
    export::write_trace_csv(&mut buf, &trace)?;
    ctx.emit("converge.csv", &String::from_utf8_lossy(&buf))
}

