//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the task itself fails (training did not
//! converge, a baseline could not be designed), 2 for usage and
//! configuration errors. Every subcommand first prints its effective
//! configuration as one JSON line on standard error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pendulum_core::baselines::{design_lqr, LqrConfig, LqrController, PidConfig, PidController};
use pendulum_core::env::{self, Controller, Disturbance, EnvConfig};
use pendulum_core::evaluation::{self, steps_for};
use pendulum_core::policy::{DeterministicPolicy, StochasticPolicy, DEFAULT_HIDDEN_WIDTH};
use pendulum_core::training::{self, default_grid, OptimizerKind, TrainingConfig};
use pendulum_core::{seeded_rng, ModelParameters, State};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::archive::{self, ArchiveMetadata};
use crate::formats::{self, FineTuneLog, GridFile, ModelParametersFile, RunLog};
use crate::sweep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
enum Failure {
    Usage(String),
    Task(String),
}

type CmdResult = Result<i32, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "pendulum", version, about = "Policy-gradient cart-pole trainer and controller toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy until one episode balances for the success horizon.
    Train(TrainArgs),
    /// Train over a grid of discount factors and learning rates.
    Sweep(SweepArgs),
    /// Balance rate of a saved policy from random initial states.
    Eval(EvalArgs),
    /// Run a saved policy from a fixed start, optionally with taps.
    Simulate(SimulateArgs),
    /// Run the PID or LQR baseline from a fixed start.
    Baseline(BaselineArgs),
    /// Validate a saved policy and write it out again.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone)]
struct PlantArgs {
    /// JSON file of physical constants; missing keys keep their defaults.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Optimizer {
    Adam,
    Sgd,
}

impl From<Optimizer> for OptimizerKind {
    fn from(o: Optimizer) -> Self {
        match o {
            Optimizer::Adam => OptimizerKind::Adam,
            Optimizer::Sgd => OptimizerKind::Sgd,
        }
    }
}

/// Hyperparameters shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
struct LearnerArgs {
    /// Weight of the entropy term in the loss; negative values reward
    /// exploration.
    #[arg(long, default_value_t = TrainingConfig::default().epsilon_entropy, allow_negative_numbers = true)]
    epsilon: f64,
    /// Standard deviation of the freshly initialised policy, V.
    #[arg(long, default_value_t = TrainingConfig::default().initial_sigma)]
    initial_sigma: f64,
    /// Surviving steps that count as a balanced episode.
    #[arg(long, default_value_t = TrainingConfig::default().success_steps)]
    success_steps: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_WIDTH)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    optimizer: Optimizer,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = TrainingConfig::default().gamma)]
    gamma: f64,
    #[arg(long = "lr", default_value_t = TrainingConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainingConfig::default().max_trials)]
    max_trials: usize,
    #[command(flatten)]
    learner: LearnerArgs,
    /// Extra episodes at a smaller learning rate after convergence.
    #[arg(long, default_value_t = 0)]
    fine_tune_episodes: usize,
    #[arg(long, default_value_t = 0.001)]
    fine_tune_lr: f64,
    #[command(flatten)]
    plant: PlantArgs,
    /// Where to write the policy archive (`-` for standard output).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Where to write the JSON run log (`-` for standard output).
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// JSON grid: `{"gamma": [..], "learning_rate": [..]}` or a list of
    /// `{"gamma", "learning_rate"}` cells. Defaults to the built-in grid.
    #[arg(long, value_name = "FILE")]
    grid: Option<PathBuf>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// First seed; each cell uses `seed .. seed + seeds`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_trials: usize,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    plant: PlantArgs,
    /// CSV destination (`-` for standard output).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Train independent runs concurrently.
    #[arg(long)]
    parallel: bool,
    /// Worker threads for `--parallel`; defaults to one per core.
    #[arg(long, requires = "parallel")]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Apply the mean action (the default).
    #[arg(long, conflicts_with = "stochastic")]
    deterministic: bool,
    /// Sample actions from the policy instead.
    #[arg(long)]
    stochastic: bool,
    #[arg(long, default_value_t = 500)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    plant: PlantArgs,
}

/// Fixed start and tap schedule shared by `simulate` and `baseline`.
#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x0_mm: f64,
    #[arg(long, allow_negative_numbers = true)]
    alpha0_deg: Option<f64>,
    /// Tap on the pole, `t=<seconds>,dalpha=<rad/s>`; may be repeated.
    #[arg(long, value_name = "SPEC", value_parser = parse_disturbance)]
    disturb: Vec<(f64, f64)>,
    /// CSV trace destination (`-` for standard output).
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    plant: PlantArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Sample actions instead of applying the mean.
    #[arg(long)]
    stochastic: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BaselineKind {
    Pid,
    Lqr,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    controller: BaselineKind,
    /// JSON gains (PID) or Q/R weights (LQR); missing keys keep defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE", default_value = "-")]
    out: PathBuf,
}

/// Parses `t=10,dalpha=0.5` into `(time_s, delta_alpha_dot)`.
pub fn parse_disturbance(spec: &str) -> Result<(f64, f64), String> {
    let mut t = None;
    let mut d = None;
    for part in spec.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found `{part}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", value.trim()))?;
        if !value.is_finite() {
            return Err(format!("`{key}` must be finite"));
        }
        match key.trim() {
            "t" => t = Some(value),
            "dalpha" => d = Some(value),
            other => return Err(format!("unknown key `{other}` (expected t, dalpha)")),
        }
    }
    match (t, d) {
        (Some(t), Some(d)) if t >= 0.0 => Ok((t, d)),
        (Some(_), Some(_)) => Err("t must be non-negative".into()),
        _ => Err("both t and dalpha are required".into()),
    }
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn open_input(flag: &str, path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| usage(format!("{flag}: cannot read {}: {e}", path.display())))
}

/// Writes an artifact to `path`, or to `out` when the path is `-`.
fn emit(
    flag: &str,
    path: &Path,
    out: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> Result<(), String>,
) -> Result<(), Failure> {
    if is_stdout(path) {
        return write(out).map_err(|e| Failure::Task(format!("{flag}: {e}")));
    }
    let file = File::create(path).map_err(|e| usage(format!("{flag}: cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w).map_err(|e| Failure::Task(format!("{flag}: {}: {e}", path.display())))?;
    w.flush()
        .map_err(|e| Failure::Task(format!("{flag}: {}: {e}", path.display())))
}

fn flag_for(field: &str) -> &str {
    match field {
        "gamma" => "--gamma",
        "learning_rate" => "--lr",
        "epsilon_entropy" => "--epsilon",
        "initial_sigma" => "--initial-sigma",
        "success_steps" => "--success-steps",
        "hidden_width" => "--hidden",
        "max_steps" => "--max-steps",
        "episodes" => "--episodes",
        _ => "--params",
    }
}

fn invalid_config(e: pendulum_core::Error) -> Failure {
    match e {
        pendulum_core::Error::InvalidParameter { field, .. } => usage(format!("{}: {e}", flag_for(field))),
        other => usage(other.to_string()),
    }
}

fn load_plant(args: &PlantArgs) -> Result<ModelParameters, Failure> {
    match &args.params {
        None => Ok(ModelParameters::default()),
        Some(path) => formats::read_model_parameters(open_input("--params", path)?)
            .map_err(|e| usage(format!("--params: {}: {e}", path.display()))),
    }
}

fn env_for(params: ModelParameters) -> Result<EnvConfig, Failure> {
    let env = EnvConfig {
        params,
        init_x_bound: params.track_half_length,
        init_alpha_bound: params.alpha_limit,
        ..EnvConfig::default()
    };
    env.validate().map_err(|e| usage(format!("--params: {e}")))?;
    Ok(env)
}

fn load_model(path: &Path) -> Result<archive::PolicyArchive, Failure> {
    archive::read_policy(open_input("--model", path)?).map_err(|e| usage(format!("--model: {}: {e}", path.display())))
}

/// Overlays the keys of a JSON object on the serialised defaults, so a
/// config file only needs the values it changes.
fn merge_config<T: Serialize + DeserializeOwned>(flag: &str, path: &Path, default: &T) -> Result<T, Failure> {
    let bad = |e: String| usage(format!("{flag}: {}: {e}", path.display()));
    let overlay: Value = formats::read_json(open_input(flag, path)?).map_err(|e| bad(e.to_string()))?;
    let Value::Object(overlay) = overlay else {
        return Err(bad("expected a JSON object".into()));
    };
    let mut base = serde_json::to_value(default).map_err(|e| bad(e.to_string()))?;
    let fields = base.as_object_mut().expect("configs serialise to objects");
    for (k, v) in overlay {
        if !fields.contains_key(&k) {
            return Err(bad(format!("unknown key `{k}`")));
        }
        fields.insert(k, v);
    }
    serde_json::from_value(base).map_err(|e| bad(e.to_string()))
}

fn print_config(err: &mut dyn Write, command: &str, config: Value) {
    let line = json!({ "command": command, "config": config });
    let _ = writeln!(err, "effective config: {line}");
}

fn training_config(
    learner: &LearnerArgs,
    gamma: f64,
    learning_rate: f64,
    seed: u64,
    max_trials: usize,
) -> Result<TrainingConfig, Failure> {
    let config = TrainingConfig {
        gamma,
        learning_rate,
        epsilon_entropy: learner.epsilon,
        initial_sigma: learner.initial_sigma,
        success_steps: learner.success_steps,
        max_trials,
        seed,
        hidden_width: learner.hidden,
        optimizer: learner.optimizer.into(),
        ..TrainingConfig::default()
    };
    config.validate().map_err(invalid_config)?;
    Ok(config)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let params = load_plant(&a.plant)?;
    let env = env_for(params)?;
    let config = training_config(&a.learner, a.gamma, a.learning_rate, a.seed, a.max_trials)?;
    if a.fine_tune_episodes > 0 && !(a.fine_tune_lr > 0.0 && a.fine_tune_lr.is_finite()) {
        return Err(usage("--fine-tune-lr: must be positive and finite"));
    }
    print_config(
        err,
        "train",
        json!({
            "training": config,
            "model_parameters": ModelParametersFile::from(params),
            "fine_tune_episodes": a.fine_tune_episodes,
            "fine_tune_lr": a.fine_tune_lr,
            "out": a.out,
            "log": a.log,
        }),
    );

    let (mut result, mut secs) = sweep::train_timed(&config, &env).map_err(invalid_config)?;
    let mut fine_tune = None;
    if result.succeeded && a.fine_tune_episodes > 0 {
        let ft_seed = config.seed.wrapping_add(1);
        let start = std::time::Instant::now();
        let lengths = training::fine_tune(
            &mut result.params,
            &config,
            &env,
            a.fine_tune_lr,
            a.fine_tune_episodes,
            ft_seed,
        )
        .map_err(|e| Failure::Task(format!("fine-tuning failed: {e}")))?;
        secs += start.elapsed().as_secs_f64();
        fine_tune = Some(FineTuneLog {
            learning_rate: a.fine_tune_lr,
            episodes: a.fine_tune_episodes,
            seed: ft_seed,
            episode_lengths: lengths,
        });
    }

    let created = formats::unix_now();
    let log = RunLog {
        config,
        model_parameters: params.into(),
        succeeded: result.succeeded,
        diverged: result.diverged,
        trials_used: result.trials_used,
        episode_lengths: result.episode_lengths.clone(),
        fine_tune,
        wall_time_s: secs,
        created_unix_s: created,
    };
    if let Some(path) = &a.log {
        emit("--log", path, out, |w| formats::write_run_log(w, &log).map_err(|e| e.to_string()))?;
    }
    if let Some(path) = &a.out {
        let meta = ArchiveMetadata {
            training: Some(config),
            seed: Some(config.seed),
            trials_used: Some(result.trials_used),
            created_unix_s: Some(created),
        };
        if result.diverged {
            let _ = writeln!(err, "not writing --out: the parameters are no longer finite");
        } else {
            emit("--out", path, out, |w| {
                archive::write_policy(w, &result.params, &meta).map_err(|e| e.to_string())
            })?;
        }
    }

    let summary = json!({
        "succeeded": result.succeeded,
        "diverged": result.diverged,
        "trials_used": result.trials_used,
        "wall_time_s": secs,
    });
    let _ = writeln!(err, "{summary}");
    if result.succeeded {
        Ok(EXIT_OK)
    } else if result.diverged {
        Err(Failure::Task(format!(
            "training diverged after {} trials",
            result.trials_used
        )))
    } else {
        Err(Failure::Task(format!(
            "no episode reached {} steps within {} trials",
            config.success_steps, config.max_trials
        )))
    }
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let params = load_plant(&a.plant)?;
    let env = env_for(params)?;
    let grid = match &a.grid {
        None => default_grid(),
        Some(path) => formats::read_json::<GridFile, _>(open_input("--grid", path)?)
            .map_err(|e| usage(format!("--grid: {}: {e}", path.display())))?
            .cells(),
    };
    if grid.is_empty() {
        return Err(usage("--grid: the grid has no cells"));
    }
    if a.seeds == 0 {
        return Err(usage("--seeds: must be at least 1"));
    }
    if a.threads == Some(0) {
        return Err(usage("--threads: must be at least 1"));
    }
    let first = grid[0];
    let base = training_config(&a.learner, first.gamma, first.learning_rate, a.seed, a.max_trials)?;
    for cell in &grid {
        training::cell_config(&base, *cell, a.seed)
            .validate()
            .map_err(|e| usage(format!("--grid: {e}")))?;
    }
    print_config(
        err,
        "sweep",
        json!({
            "grid": grid,
            "seeds": a.seeds,
            "base": base,
            "model_parameters": ModelParametersFile::from(params),
            "parallel": a.parallel,
            "threads": a.threads,
            "out": a.out,
        }),
    );

    let report = if let Some(n) = a.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Task(e.to_string()))?;
        pool.install(|| sweep::run_sweep(&grid, a.seeds, &base, &env, a.parallel))
    } else {
        sweep::run_sweep(&grid, a.seeds, &base, &env, a.parallel)
    }
    .map_err(invalid_config)?;

    let csv_path = a.out.clone().unwrap_or_else(|| PathBuf::from("-"));
    emit("--out", &csv_path, out, |w| {
        formats::write_sweep(w, &report.rows).map_err(|e| e.to_string())
    })?;
    let cells: Vec<Value> = report
        .cells()
        .iter()
        .map(|c| {
            json!({
                "gamma": c.cell.gamma,
                "learning_rate": c.cell.learning_rate,
                "successes": c.successes,
                "runs": c.runs,
                "mean_trials_to_success": c.mean_trials_to_success,
            })
        })
        .collect();
    let summary = json!({
        "runs": report.runs(),
        "successes": report.successes(),
        "success_rate": report.success_rate(),
        "mean_trials_to_success": report.mean_trials_to_success(),
        "cells": cells,
    });
    let _ = writeln!(err, "{summary}");
    Ok(EXIT_OK)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let params = load_plant(&a.plant)?;
    let env = env_for(params)?;
    let model = load_model(&a.model)?;
    if a.episodes == 0 {
        return Err(usage("--episodes: must be at least 1"));
    }
    if a.max_steps == 0 {
        return Err(usage("--max-steps: must be at least 1"));
    }
    let deterministic = a.deterministic || !a.stochastic;
    print_config(
        err,
        "eval",
        json!({
            "model": a.model,
            "episodes": a.episodes,
            "deterministic": deterministic,
            "max_steps": a.max_steps,
            "seed": a.seed,
            "model_parameters": ModelParametersFile::from(params),
        }),
    );
    let report = evaluation::balance_rate(&model.params, &env, a.episodes, a.max_steps, deterministic, a.seed)
        .map_err(invalid_config)?;
    let summary = json!({
        "episodes": report.episodes,
        "balanced": report.balanced,
        "balance_rate": report.rate(),
        "mean_steps": report.mean_steps,
    });
    let _ = writeln!(out, "{summary}");
    Ok(EXIT_OK)
}

struct Scenario {
    env: EnvConfig,
    start: State,
    steps: usize,
    disturbances: Vec<Disturbance>,
}

fn scenario(s: &ScenarioArgs, default_duration: f64, default_alpha0_deg: f64) -> Result<(Scenario, Value), Failure> {
    let params = load_plant(&s.plant)?;
    let env = env_for(params)?;
    let duration = s.duration.unwrap_or(default_duration);
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(usage("--duration: must be positive"));
    }
    let alpha0_deg = s.alpha0_deg.unwrap_or(default_alpha0_deg);
    if !alpha0_deg.is_finite() || !s.x0_mm.is_finite() {
        return Err(usage("--alpha0-deg/--x0-mm: must be finite"));
    }
    let steps = steps_for(duration, params.h).max(1);
    let start = State::new(s.x0_mm / 1000.0, alpha0_deg.to_radians(), 0.0, 0.0);
    let disturbances: Vec<Disturbance> = s
        .disturb
        .iter()
        .map(|&(t, d)| Disturbance::at_time(t, d, params.h))
        .collect();
    let echo = json!({
        "duration_s": duration,
        "steps": steps,
        "x0_mm": s.x0_mm,
        "alpha0_deg": alpha0_deg,
        "disturbances": disturbances,
        "trace": s.trace,
        "model_parameters": ModelParametersFile::from(params),
    });
    Ok((
        Scenario {
            env,
            start,
            steps,
            disturbances,
        },
        echo,
    ))
}

/// Runs the scenario, writes the trace if asked and prints a summary.
fn run_scenario<C: Controller + ?Sized>(
    sc: &Scenario,
    trace_path: Option<&Path>,
    controller: &mut C,
    seed: u64,
    extra: Value,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let mut rng = seeded_rng(seed);
    let trace = env::rollout_from(&sc.env, sc.start, controller, &mut rng, sc.steps, &sc.disturbances);
    if let Some(path) = trace_path {
        emit("--trace", path, out, |w| {
            formats::write_trace(w, &trace, &sc.env.params).map_err(|e| e.to_string())
        })?;
    }
    let peak = evaluation::peak_alpha_from(&trace, 0);
    let max_v = trace.voltages.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_x = trace.post_states().fold(0.0_f64, |m, s| m.max(s.x.abs()));
    let mut summary = json!({
        "steps": trace.len(),
        "requested_steps": sc.steps,
        "terminated": trace.terminated,
        "max_abs_alpha_deg": peak.to_degrees(),
        "max_abs_x_mm": max_x * 1000.0,
        "max_abs_voltage_V": max_v,
    });
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    if trace_path.is_some_and(is_stdout) {
        let _ = writeln!(err, "{summary}");
    } else {
        let _ = writeln!(out, "{summary}");
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let model = load_model(&a.model)?;
    let (sc, echo) = scenario(&a.scenario, 20.0, 1.0)?;
    print_config(
        err,
        "simulate",
        json!({ "model": a.model, "stochastic": a.stochastic, "seed": a.seed, "scenario": echo }),
    );
    let trace_path = a.scenario.trace.as_deref();
    if a.stochastic {
        run_scenario(&sc, trace_path, &mut StochasticPolicy(&model.params), a.seed, json!({}), out, err)?;
    } else {
        run_scenario(&sc, trace_path, &mut DeterministicPolicy(&model.params), a.seed, json!({}), out, err)?;
    }
    Ok(EXIT_OK)
}

fn cmd_baseline(a: BaselineArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let (sc, echo) = scenario(&a.scenario, 10.0, 3.0)?;
    let trace_path = a.scenario.trace.as_deref();
    match a.controller {
        BaselineKind::Pid => {
            let config = match &a.config {
                None => PidConfig::default(),
                Some(p) => merge_config("--config", p, &PidConfig::default())?,
            };
            config.validate().map_err(|e| usage(format!("--config: {e}")))?;
            print_config(err, "baseline", json!({ "controller": "pid", "pid": config, "scenario": echo }));
            let mut c = PidController::new(config, sc.env.params.h);
            run_scenario(&sc, trace_path, &mut c, 0, json!({}), out, err)?;
        }
        BaselineKind::Lqr => {
            let config = match &a.config {
                None => LqrConfig::default(),
                Some(p) => merge_config("--config", p, &LqrConfig::default())?,
            };
            config.validate().map_err(|e| usage(format!("--config: {e}")))?;
            print_config(err, "baseline", json!({ "controller": "lqr", "lqr": config, "scenario": echo }));
            let design = design_lqr(&sc.env.params, &config).map_err(|e| Failure::Task(format!("LQR design failed: {e}")))?;
            let extra = json!({
                "gain": design.gain.iter().collect::<Vec<_>>(),
                "riccati_residual": design.residual,
                "closed_loop_max_real": design.closed_loop_max_real,
            });
            run_scenario(&sc, trace_path, &mut LqrController { gain: design.gain }, 0, extra, out, err)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_export(a: ExportArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    print_config(err, "export", json!({ "model": a.model, "out": a.out }));
    let model = load_model(&a.model)?;
    emit("--out", &a.out, out, |w| {
        archive::write_policy(w, &model.params, &model.metadata).map_err(|e| e.to_string())
    })?;
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_USAGE
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Baseline(a) => cmd_baseline(a, out, err),
        Command::Export(a) => cmd_export(a, out, err),
    };
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Task(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_TASK_FAILED
        }
    }
}
