//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::distributions::{
    make_distribution, DistributionError, DistributionKind, DurationDistribution,
};
use crate::privacy::{
    curve_file_name, figure_candidates, inverse_ccdf_curve, inverse_hazard_curve, lr_curve,
    write_curve_csv, Curve, PrivacyError,
};
use crate::schedule::rng_stream;
use crate::sim::{
    fft_table, run_simulation, write_fft_csv, Engine, FftGrid, Scenario, SimError,
    SimulationConfig, DAY,
};
use crate::store::{Server, Store, StoreConfig, StoreError, SystemClock};
use crate::tuning::{
    build_mechanism, mean_up_for_availability, optimal_shape, TuningError, TuningSpec,
};
use crate::utility::{
    generate_synthetic_trace, load_trace, utility_grid, UtilityError, DEFAULT_DECAY_MEAN,
};

pub use config::{RunConfig, Seconds};

const STANDARD_THRESHOLDS_DAYS: [u64; 6] = [30, 60, 90, 120, 150, 180];
const STANDARD_AVAILABILITIES: [f64; 3] = [0.85, 0.90, 0.95];
const DEFAULT_MEAN_DOWN: u64 = 3600;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}
validation_from!(TuningError, SimError, DistributionError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<PrivacyError> for CliError {
    fn from(e: PrivacyError) -> Self {
        match e {
            PrivacyError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<UtilityError> for CliError {
    fn from(e: UtilityError) -> Self {
        match e {
            UtilityError::Io(_) | UtilityError::Csv(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Tuning(_) | StoreError::ConfigMismatch => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn missing(flag: &str) -> CliError {
    CliError::Validation(format!("missing required {flag}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "lethe",
    version,
    about = "Intermittent-withdrawal deletion privacy toolkit"
)]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the mechanism for an availability target and threshold estimate.
    Tune(TuneArgs),
    /// Likelihood ratio against down-elapsed time for negative-binomial and zeta downs.
    LrCurve(LrArgs),
    /// Inverse hazard rate of candidate up-time distributions.
    HazardCurve(CurveArgs),
    /// Inverse CCDF of candidate down-time distributions.
    CcdfCurve(CurveArgs),
    /// Run the snapshot adversary over a synthetic platform.
    Simulate(SimArgs),
    /// Falsely flagged counts over the availability × threshold grid.
    FftTable(FftArgs),
    /// Fraction of interactions that land in up phases.
    Utility(UtilityArgs),
    /// Visibility-gated post store.
    Store {
        #[command(subcommand)]
        command: StoreCommand,
    },
}

#[derive(Debug, Subcommand)]
enum StoreCommand {
    /// Serve the newline-delimited JSON protocol over TCP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
struct MeanDownArgs {
    /// Mean down duration, e.g. 1h.
    #[arg(long, conflicts_with = "mean_down_seconds")]
    mean_down: Option<Seconds>,
    #[arg(long)]
    mean_down_seconds: Option<u64>,
}

impl MeanDownArgs {
    fn resolve(&self, cfg: &RunConfig) -> u64 {
        self.mean_down
            .map(|s| s.0)
            .or(self.mean_down_seconds)
            .or(cfg.tuning.mean_down.map(|s| s.0))
            .unwrap_or(DEFAULT_MEAN_DOWN)
    }
}

#[derive(Debug, Clone, Args)]
struct ThetaArgs {
    /// Decision threshold, e.g. 30d. Repeatable where several are accepted.
    #[arg(long, conflicts_with = "theta_days")]
    theta: Vec<Seconds>,
    #[arg(long)]
    theta_days: Vec<u64>,
}

impl ThetaArgs {
    fn flags(&self) -> Vec<u64> {
        if !self.theta.is_empty() {
            self.theta.iter().map(|s| s.0).collect()
        } else {
            self.theta_days.iter().map(|d| d * DAY).collect()
        }
    }
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    availability: Option<f64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    #[command(flatten)]
    theta: ThetaArgs,
    /// Output JSON file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LrArgs {
    #[arg(long)]
    availability: Option<f64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    /// Negative-binomial shapes to plot; by default the tuned shape of each threshold.
    #[arg(long)]
    shape: Vec<f64>,
    #[command(flatten)]
    theta: ThetaArgs,
    #[arg(long, default_value = "180d")]
    t_max: Seconds,
    #[arg(long, default_value = "1d")]
    step: Seconds,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Mean of every candidate (default 9h for hazard curves, 1h for CCDF curves).
    #[arg(long)]
    mean: Option<Seconds>,
    /// Shape of the negative-binomial candidate.
    #[arg(long, default_value_t = 0.15)]
    nb_shape: f64,
    /// Range (default 24h for hazard curves, 6h for CCDF curves).
    #[arg(long)]
    t_max: Option<Seconds>,
    #[arg(long, default_value = "1m")]
    step: Seconds,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    availability: Option<f64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    #[command(flatten)]
    theta: ThetaArgs,
    /// Tune every cell for this threshold instead of its own.
    #[arg(long)]
    theta_star: Option<Seconds>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    initial_posts: Option<u64>,
    #[arg(long)]
    creations_per_day: Option<u64>,
    #[arg(long)]
    deletions_per_day: Option<u64>,
    #[arg(long)]
    horizon_days: Option<u64>,
    #[arg(long)]
    scale_factor: Option<f64>,
    #[arg(long)]
    engine: Option<Engine>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FftArgs {
    /// Divide the 0.01% platform sample by this factor (100 gives a 0.0001% sample).
    #[arg(long, default_value_t = 1)]
    scale_down: u64,
    #[arg(long)]
    availability: Vec<f64>,
    #[arg(long)]
    theta_days: Vec<u64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    #[arg(long)]
    engine: Option<Engine>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct UtilityArgs {
    /// Interaction trace CSV (`post_key,creation_epoch_seconds,offset_seconds`).
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Use a synthetic exponential-decay trace.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    posts: Option<usize>,
    #[arg(long)]
    interactions_per_post: Option<f64>,
    #[arg(long)]
    decay_mean: Option<Seconds>,
    #[arg(long)]
    availability: Vec<f64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    #[arg(long)]
    theta_days: Vec<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long)]
    availability: Option<f64>,
    #[command(flatten)]
    mean_down: MeanDownArgs,
    #[command(flatten)]
    theta: ThetaArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Period of the schedule updater and snapshots.
    #[arg(long)]
    update_period: Option<Seconds>,
}

/// `--seed`, then the config file, then `LETHE_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64> {
    if let Some(s) = flag.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var("LETHE_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Validation(format!("LETHE_SEED is not an unsigned integer: {v:?}"))
        }),
        Err(_) => Ok(0),
    }
}

fn out_path(flag: &Option<PathBuf>, cfg: &RunConfig, default_name: &str) -> Option<PathBuf> {
    flag.clone()
        .or_else(|| cfg.out_dir.as_ref().map(|d| d.join(default_name)))
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

/// Writes `manifest.json` beside the outputs.
fn write_manifest(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
    });
    std::fs::write(dir.join("manifest.json"), pretty(&manifest))?;
    Ok(())
}

/// JSON to `path` (plus a manifest in its directory) or to stdout.
fn emit_json<T: Serialize>(
    path: Option<PathBuf>,
    value: &T,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
) -> Result<()> {
    match path {
        Some(p) => {
            ensure_parent(&p)?;
            std::fs::write(&p, pretty(value))?;
            let dir = p
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            write_manifest(dir, command, seed, config)
        }
        None => {
            print!("{}", pretty(value));
            Ok(())
        }
    }
}

fn tune(a: &TuneArgs, cfg: &RunConfig) -> Result<()> {
    let availability = a
        .availability
        .or(cfg.tuning.availability)
        .ok_or_else(|| missing("--availability"))?;
    let theta = match a.theta.flags().as_slice() {
        [] => cfg
            .tuning
            .theta
            .map(|s| s.0)
            .ok_or_else(|| missing("--theta"))?,
        [t] => *t,
        _ => return Err(CliError::Validation("tune takes a single --theta".into())),
    };
    let spec = TuningSpec {
        availability_target: availability,
        mean_down: a.mean_down.resolve(cfg) as f64,
        decision_threshold_estimate: theta as f64,
    };
    let m = build_mechanism(spec)?;
    let config = serde_json::to_value(spec).expect("serializable");
    emit_json(
        out_path(&a.out, cfg, "tune.json"),
        &m.report(),
        "tune",
        None,
        config,
    )
}

fn write_curves(
    dir: &Path,
    figure: &str,
    dists: &[DurationDistribution],
    curves: &[Curve],
    log10: bool,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (d, c) in dists.iter().zip(curves) {
        let name = curve_file_name(figure, d);
        write_curve_csv(&dir.join(&name), c, log10)?;
        names.push(name);
    }
    Ok(names)
}

fn lr(a: &LrArgs, cfg: &RunConfig) -> Result<()> {
    let availability = a.availability.or(cfg.tuning.availability).unwrap_or(0.90);
    let mean_down = a.mean_down.resolve(cfg) as f64;
    let up = DurationDistribution::geometric(mean_up_for_availability(availability, mean_down)?)?;
    let shapes: Vec<f64> = if !a.shape.is_empty() {
        a.shape.clone()
    } else {
        let thetas = match a.theta.flags() {
            t if t.is_empty() => STANDARD_THRESHOLDS_DAYS.iter().map(|d| d * DAY).collect(),
            t => t,
        };
        thetas
            .iter()
            .map(|&t| optimal_shape(mean_down, t as f64))
            .collect::<std::result::Result<_, _>>()?
    };
    let mut downs = shapes
        .iter()
        .map(|&n| DurationDistribution::negative_binomial(mean_down, n))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    downs.push(make_distribution(DistributionKind::Zeta, mean_down, None)?);
    let curves = lr_curve(&up, &downs, a.t_max.0, a.step.0)?;
    let dir = out_dir(&a.out_dir, cfg);
    let files = write_curves(&dir, "lr", &downs, &curves, true)?;
    let config = json!({
        "availability": availability,
        "mean_down_seconds": mean_down,
        "shapes": shapes,
        "t_max_seconds": a.t_max.0,
        "step_seconds": a.step.0,
        "files": files,
        "values": "log10",
    });
    write_manifest(&dir, "lr-curve", None, config)
}

fn curve(a: &CurveArgs, cfg: &RunConfig, hazard: bool) -> Result<()> {
    let (figure, mean, t_max) = if hazard {
        (
            "hazard",
            a.mean.map_or(9 * 3600, |s| s.0),
            a.t_max.map_or(DAY, |s| s.0),
        )
    } else {
        (
            "ccdf",
            a.mean.map_or(3600, |s| s.0),
            a.t_max.map_or(6 * 3600, |s| s.0),
        )
    };
    let dists = figure_candidates(mean as f64, a.nb_shape);
    let curves = dists
        .iter()
        .map(|d| {
            if hazard {
                inverse_hazard_curve(d, t_max, a.step.0)
            } else {
                inverse_ccdf_curve(d, t_max, a.step.0)
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let dir = out_dir(&a.out_dir, cfg);
    let files = write_curves(&dir, figure, &dists, &curves, false)?;
    let config = json!({
        "mean_seconds": mean,
        "nb_shape": a.nb_shape,
        "t_max_seconds": t_max,
        "step_seconds": a.step.0,
        "files": files,
    });
    let command = if hazard { "hazard-curve" } else { "ccdf-curve" };
    write_manifest(&dir, command, None, config)
}

fn simulate(a: &SimArgs, cfg: &RunConfig) -> Result<()> {
    let s = &cfg.simulation;
    let thresholds = match a.theta.flags() {
        t if !t.is_empty() => t,
        _ => s
            .thresholds
            .as_ref()
            .map(|v| v.iter().map(|x| x.0).collect())
            .or_else(|| cfg.tuning.theta.map(|t| vec![t.0]))
            .ok_or_else(|| missing("--theta-days"))?,
    };
    let sim = SimulationConfig {
        initial_posts: a
            .initial_posts
            .or(s.initial_posts)
            .ok_or_else(|| missing("--initial-posts"))?,
        creations_per_day: a
            .creations_per_day
            .or(s.creations_per_day)
            .ok_or_else(|| missing("--creations-per-day"))?,
        deletions_per_day: a
            .deletions_per_day
            .or(s.deletions_per_day)
            .ok_or_else(|| missing("--deletions-per-day"))?,
        horizon_days: a
            .horizon_days
            .or(s.horizon_days)
            .ok_or_else(|| missing("--horizon-days"))?,
        availability_target: a
            .availability
            .or(cfg.tuning.availability)
            .ok_or_else(|| missing("--availability"))?,
        mean_down: a.mean_down.resolve(cfg) as f64,
        theta_star_for_tuning: a.theta_star.or(s.theta_star_for_tuning).map(|t| t.0 as f64),
        thresholds,
        scenario: a.scenario.or(s.scenario).unwrap_or(Scenario::Multi),
        scale_factor: a.scale_factor.or(s.scale_factor).unwrap_or(1.0),
        seed: resolve_seed(a.seed, cfg)?,
        engine: a.engine.or(s.engine).unwrap_or_default(),
    };
    sim.validate()?;
    let report = run_simulation(&sim)?;
    let config = serde_json::to_value(&sim).expect("serializable");
    emit_json(
        out_path(&a.out, cfg, "report.json"),
        &report,
        "simulate",
        Some(sim.seed),
        config,
    )
}

fn fft(a: &FftArgs, cfg: &RunConfig) -> Result<()> {
    if a.scale_down == 0 {
        return Err(CliError::Validation(
            "--scale-down must be at least 1".into(),
        ));
    }
    let seed = resolve_seed(a.seed, cfg)?;
    let mut base = SimulationConfig::platform_sample(0.9, &[30], Scenario::Multi, seed)
        .scaled_down(a.scale_down);
    base.mean_down = a.mean_down.resolve(cfg) as f64;
    if let Some(e) = a.engine.or(cfg.simulation.engine) {
        base.engine = e;
    }
    let mut grid = FftGrid::standard(base);
    if !a.availability.is_empty() {
        grid.availabilities = a.availability.clone();
    }
    if !a.theta_days.is_empty() {
        grid.thresholds_days = a.theta_days.clone();
    }
    let cells = fft_table(&grid)?;
    let path = out_path(&a.out, cfg, "fft.csv").unwrap_or_else(|| PathBuf::from("fft.csv"));
    ensure_parent(&path)?;
    write_fft_csv(&path, &cells).map_err(|e| CliError::Runtime(e.to_string()))?;
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    write_manifest(
        dir,
        "fft-table",
        Some(seed),
        serde_json::to_value(&grid).expect("serializable"),
    )
}

#[derive(Serialize)]
struct UtilityRow {
    availability: f64,
    theta_days: u64,
    shape_n: f64,
    allowed: u64,
    missed: u64,
    utility: Option<f64>,
}

fn utility(a: &UtilityArgs, cfg: &RunConfig) -> Result<()> {
    let u = &cfg.utility;
    let seed = resolve_seed(a.seed, cfg)?;
    let trace_path = a
        .trace
        .clone()
        .or_else(|| if a.synthetic { None } else { u.trace.clone() });
    let posts = a.posts.or(u.synthetic_posts).unwrap_or(10_000);
    let per_post = a
        .interactions_per_post
        .or(u.interactions_per_post)
        .unwrap_or(20.0);
    let decay = a
        .decay_mean
        .or(u.decay_mean)
        .map_or(DEFAULT_DECAY_MEAN, |s| s.0 as f64);
    let (trace, source) = match &trace_path {
        Some(p) => (load_trace(p)?, json!({"trace": p})),
        None if a.synthetic || u.synthetic_posts.is_some() => (
            generate_synthetic_trace(posts, per_post, decay, &mut rng_stream(seed, u64::MAX))?,
            json!({"synthetic": {"posts": posts, "interactions_per_post": per_post, "decay_mean_seconds": decay}}),
        ),
        None => return Err(missing("--trace or --synthetic")),
    };
    let availabilities = if !a.availability.is_empty() {
        a.availability.clone()
    } else {
        u.availabilities
            .clone()
            .unwrap_or_else(|| STANDARD_AVAILABILITIES.to_vec())
    };
    let thresholds: Vec<u64> = if !a.theta_days.is_empty() {
        a.theta_days.clone()
    } else {
        u.thresholds
            .as_ref()
            .map(|v| v.iter().map(|s| s.0 / DAY).collect())
            .unwrap_or_else(|| STANDARD_THRESHOLDS_DAYS.to_vec())
    };
    let mean_down = a.mean_down.resolve(cfg) as f64;
    let cells = utility_grid(&trace, &availabilities, &thresholds, mean_down, seed)?;
    let rows: Vec<UtilityRow> = cells
        .iter()
        .map(|c| {
            let (allowed, missed) = match c.utility {
                crate::utility::Utility::Measured { allowed, missed } => (allowed, missed),
                crate::utility::Utility::NoInteractions => (0, 0),
            };
            UtilityRow {
                availability: c.availability,
                theta_days: c.theta_days,
                shape_n: c.shape_n,
                allowed,
                missed,
                utility: c.utility.fraction(),
            }
        })
        .collect();
    let out = json!({
        "interactions": trace.interaction_count(),
        "status": if trace.interaction_count() == 0 { "no-interactions" } else { "ok" },
        "cells": rows,
    });
    let config = json!({
        "source": source,
        "availabilities": availabilities,
        "thresholds_days": thresholds,
        "mean_down_seconds": mean_down,
    });
    emit_json(
        out_path(&a.out, cfg, "utility.json"),
        &out,
        "utility",
        Some(seed),
        config,
    )
}

fn serve(a: &ServeArgs, cfg: &RunConfig) -> Result<()> {
    let theta = match a.theta.flags().as_slice() {
        [] => cfg.tuning.theta.map_or(30 * DAY, |s| s.0),
        [t] => *t,
        _ => {
            return Err(CliError::Validation(
                "store serve takes a single --theta".into(),
            ))
        }
    };
    let config = StoreConfig {
        availability: a.availability.or(cfg.tuning.availability).unwrap_or(0.90),
        mean_down: a.mean_down.resolve(cfg) as f64,
        theta_star: theta as f64,
        seed: resolve_seed(a.seed, cfg)?,
    };
    let dir = a
        .data_dir
        .clone()
        .or_else(|| cfg.store.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from("lethe-store"));
    let period = Duration::from_secs(
        a.update_period
            .or(cfg.store.update_period)
            .map_or(3600, |s| s.0)
            .max(1),
    );
    let store = Arc::new(Store::open(&dir, config, Arc::new(SystemClock::new()))?);
    let port = a.port.or(cfg.store.port).unwrap_or(7878);
    let server = Server::bind((a.bind.as_str(), port), Arc::clone(&store))?;
    eprintln!("listening on {}", server.local_addr());
    let _updater = store.spawn_updater(period);
    loop {
        std::thread::sleep(period);
        store.snapshot()?;
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::Validation)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Tune(a) => tune(a, &cfg),
        Command::LrCurve(a) => lr(a, &cfg),
        Command::HazardCurve(a) => curve(a, &cfg, true),
        Command::CcdfCurve(a) => curve(a, &cfg, false),
        Command::Simulate(a) => simulate(a, &cfg),
        Command::FftTable(a) => fft(a, &cfg),
        Command::Utility(a) => utility(a, &cfg),
        Command::Store {
            command: StoreCommand::Serve(a),
        } => serve(a, &cfg),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(CliError::Runtime(e.to_string())),
        },
        None => execute(&cli),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
