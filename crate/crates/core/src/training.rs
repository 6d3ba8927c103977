//! Vanilla policy gradient: discounted and normalised returns, the episode
//! loss, Adam / plain gradient descent, the trial loop and hyperparameter
//! sweeps.
//!
//! One trial is one stochastic rollout. A trial that crashes before the
//! success horizon is followed by exactly one parameter update computed from
//! that trajectory alone; the first trial that survives the whole horizon
//! ends training.

use alloc::vec::Vec;

use crate::env::{self, EnvConfig};
use crate::policy::{self, PolicyGradient, PolicyParameters, StochasticPolicy};
use crate::{seeded_rng, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    /// Weight of the entropy term added to the loss. The loss is minimised,
    /// so a negative weight rewards entropy and keeps σ from collapsing.
    pub epsilon_entropy: f64,
    /// σ of the freshly initialised policy, V.
    pub initial_sigma: f64,
    /// Episode length (in surviving steps) that counts as success.
    pub success_steps: usize,
    pub max_trials: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            gamma: 0.99,
            learning_rate: 0.01,
            epsilon_entropy: -0.02,
            initial_sigma: 3.0,
            success_steps: 500,
            max_trials: 5000,
            seed: 0,
            hidden_width: policy::DEFAULT_HIDDEN_WIDTH,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive and finite"));
        }
        if !self.epsilon_entropy.is_finite() {
            return Err(Error::invalid("epsilon_entropy", "must be finite"));
        }
        if !(self.initial_sigma > 0.0 && self.initial_sigma.is_finite()) {
            return Err(Error::invalid("initial_sigma", "must be positive and finite"));
        }
        if self.success_steps == 0 {
            return Err(Error::invalid("success_steps", "must be at least 1"));
        }
        if self.hidden_width == 0 {
            return Err(Error::invalid("hidden_width", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::invalid("adam_beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::invalid("adam_beta2", "must lie in [0, 1)"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::invalid("adam_epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// `R_t = r_t + γ R_{t+1}`, truncated at the end of the episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>, Error> {
    if rewards.is_empty() {
        return Err(Error::Empty("rewards"));
    }
    let mut out = alloc::vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    Ok(out)
}

/// Below this population standard deviation returns are only centred.
pub const NORMALIZE_MIN_STD: f64 = 1e-8;

/// Shifts to zero mean and scales to unit population standard deviation.
pub fn normalize_returns(returns: &[f64]) -> Result<Vec<f64>, Error> {
    if returns.is_empty() {
        return Err(Error::Empty("returns"));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    let scale = if std < NORMALIZE_MIN_STD { 1.0 } else { 1.0 / std };
    Ok(returns.iter().map(|r| (r - mean) * scale).collect())
}

/// `-R̂·ã + ε Σ H`.
pub fn episode_loss(
    log_probs: &[f64],
    normalized_returns: &[f64],
    entropies: &[f64],
    epsilon: f64,
) -> Result<f64, Error> {
    for (what, len) in [
        ("normalized_returns", normalized_returns.len()),
        ("entropies", entropies.len()),
    ] {
        if len != log_probs.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: log_probs.len(),
                got: len,
            });
        }
    }
    let policy_term: f64 = normalized_returns
        .iter()
        .zip(log_probs)
        .map(|(r, a)| r * a)
        .sum();
    Ok(-policy_term + epsilon * entropies.iter().sum::<f64>())
}

/// Adam moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: PolicyParameters,
    pub v: PolicyParameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(like: &PolicyParameters) -> Self {
        let width = like.hidden_width();
        AdamState {
            m: PolicyParameters::zeros(width),
            v: PolicyParameters::zeros(width),
            step: 0,
        }
    }
}

/// One optimiser step. In `Sgd` mode this is `θ - lr ∇` and the moments are
/// left untouched.
pub fn adam_update(
    state: &AdamState,
    params: &PolicyParameters,
    grad: &PolicyGradient,
    config: &TrainingConfig,
) -> Result<(PolicyParameters, AdamState), Error> {
    let mut params = params.clone();
    let mut state = state.clone();
    apply_update(&mut state, &mut params, grad, config)?;
    Ok((params, state))
}

/// In-place form of [`adam_update`].
pub fn apply_update(
    state: &mut AdamState,
    params: &mut PolicyParameters,
    grad: &PolicyGradient,
    config: &TrainingConfig,
) -> Result<(), Error> {
    if !params.same_shape(grad) || !params.same_shape(&state.m) {
        return Err(Error::LengthMismatch {
            what: "gradient",
            expected: params.len(),
            got: grad.len(),
        });
    }
    let lr = config.learning_rate;
    match config.optimizer {
        OptimizerKind::Sgd => {
            for (p, g) in params.iter_mut().zip(grad.iter()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            let (b1, b2) = (config.adam_beta1, config.adam_beta2);
            state.step += 1;
            let t = state.step as f64;
            let c1 = 1.0 - libm::pow(b1, t);
            let c2 = 1.0 - libm::pow(b2, t);
            let moments = state.m.iter_mut().zip(state.v.iter_mut());
            for ((p, g), (m, v)) in params.iter_mut().zip(grad.iter()).zip(moments) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + config.adam_epsilon);
            }
        }
    }
    Ok(())
}

/// Gradient of the episode loss for a recorded trace, with returns
/// discounted and normalised.
pub fn episode_gradient(
    params: &PolicyParameters,
    trace: &env::EpisodeTrace,
    config: &TrainingConfig,
) -> Result<PolicyGradient, Error> {
    let returns = normalize_returns(&discounted_returns(&trace.rewards, config.gamma)?)?;
    policy::backprop_episode(params, trace, &returns, config.epsilon_entropy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingResult {
    pub trials_used: usize,
    pub succeeded: bool,
    /// Training stopped because a gradient stopped being finite, typically
    /// after σ collapsed to zero somewhere in the state space.
    pub diverged: bool,
    /// Surviving steps of every trial, in order.
    pub episode_lengths: Vec<usize>,
    pub params: PolicyParameters,
}

/// Trains a fresh policy until one stochastic episode survives
/// `config.success_steps` steps or `config.max_trials` episodes have run.
pub fn train(config: &TrainingConfig, env: &EnvConfig) -> Result<TrainingResult, Error> {
    config.validate()?;
    env.validate()?;
    let mut rng = seeded_rng(config.seed);
    let mut params = PolicyParameters::init_with_sigma(config.hidden_width, config.initial_sigma, &mut rng)?;
    let mut opt = AdamState::new(&params);
    let mut episode_lengths = Vec::new();
    let mut succeeded = false;
    let mut diverged = false;

    for _ in 0..config.max_trials {
        let trace = env::rollout(
            env,
            &mut StochasticPolicy(&params),
            &mut rng,
            config.success_steps,
            &[],
        );
        let survived = trace.total_reward() as usize;
        episode_lengths.push(survived);
        if survived >= config.success_steps {
            succeeded = true;
            break;
        }
        let grad = episode_gradient(&params, &trace, config)?;
        if grad.iter().any(|g| !g.is_finite()) {
            diverged = true;
            break;
        }
        apply_update(&mut opt, &mut params, &grad, config)?;
    }

    Ok(TrainingResult {
        trials_used: episode_lengths.len(),
        succeeded,
        diverged,
        episode_lengths,
        params,
    })
}

/// Continues training an already converged policy for a fixed number of
/// episodes at `learning_rate`, updating after every episode including
/// successful ones. Returns the lengths of the episodes run.
pub fn fine_tune(
    params: &mut PolicyParameters,
    config: &TrainingConfig,
    env: &EnvConfig,
    learning_rate: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<usize>, Error> {
    let config = TrainingConfig {
        learning_rate,
        ..*config
    };
    config.validate()?;
    params.validate()?;
    let mut rng = seeded_rng(seed);
    let mut opt = AdamState::new(params);
    let mut lengths = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let trace = env::rollout(
            env,
            &mut StochasticPolicy(params),
            &mut rng,
            config.success_steps,
            &[],
        );
        lengths.push(trace.total_reward() as usize);
        let grad = episode_gradient(params, &trace, &config)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("params", "gradient became non-finite"));
        }
        apply_update(&mut opt, params, &grad, &config)?;
    }
    Ok(lengths)
}

/// One (gamma, learning rate) grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepCell {
    pub gamma: f64,
    pub learning_rate: f64,
}

/// The grid used to judge training convergence.
pub fn default_grid() -> Vec<SweepCell> {
    let mut grid = Vec::new();
    for gamma in [0.95, 0.97, 0.99, 0.995] {
        for learning_rate in [0.003, 0.01, 0.03] {
            grid.push(SweepCell {
                gamma,
                learning_rate,
            });
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub gamma: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub succeeded: bool,
    pub trials: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub runs: usize,
    pub successes: usize,
    /// Mean trials over successful runs; `None` if no run succeeded.
    pub mean_trials_to_success: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn runs(&self) -> usize {
        self.rows.len()
    }

    pub fn successes(&self) -> usize {
        self.rows.iter().filter(|r| r.succeeded).count()
    }

    pub fn success_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.successes() as f64 / self.rows.len() as f64
        }
    }

    /// Mean trials over successful runs.
    pub fn mean_trials_to_success(&self) -> Option<f64> {
        mean_success_trials(self.rows.iter())
    }

    /// Per-cell statistics in first-appearance order.
    pub fn cells(&self) -> Vec<CellSummary> {
        let mut cells: Vec<SweepCell> = Vec::new();
        for r in &self.rows {
            let c = SweepCell {
                gamma: r.gamma,
                learning_rate: r.learning_rate,
            };
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
        cells
            .into_iter()
            .map(|cell| {
                let rows = || {
                    self.rows
                        .iter()
                        .filter(move |r| r.gamma == cell.gamma && r.learning_rate == cell.learning_rate)
                };
                CellSummary {
                    cell,
                    runs: rows().count(),
                    successes: rows().filter(|r| r.succeeded).count(),
                    mean_trials_to_success: mean_success_trials(rows()),
                }
            })
            .collect()
    }
}

fn mean_success_trials<'a>(rows: impl Iterator<Item = &'a SweepRow>) -> Option<f64> {
    let (n, sum) = rows
        .filter(|r| r.succeeded)
        .fold((0usize, 0usize), |(n, s), r| (n + 1, s + r.trials));
    (n > 0).then(|| sum as f64 / n as f64)
}

/// Training configuration for one grid cell and seed.
pub fn cell_config(base: &TrainingConfig, cell: SweepCell, seed: u64) -> TrainingConfig {
    TrainingConfig {
        gamma: cell.gamma,
        learning_rate: cell.learning_rate,
        seed,
        ..*base
    }
}

/// All `(cell, seed)` jobs of a sweep, seeds `base.seed .. base.seed + n`.
pub fn sweep_jobs(
    grid: &[SweepCell],
    seeds_per_cell: usize,
    base: &TrainingConfig,
) -> Vec<TrainingConfig> {
    grid.iter()
        .flat_map(|&cell| {
            (0..seeds_per_cell as u64).map(move |i| cell_config(base, cell, base.seed + i))
        })
        .collect()
}

pub fn sweep_row(config: &TrainingConfig, result: &TrainingResult, wall_time_s: f64) -> SweepRow {
    SweepRow {
        gamma: config.gamma,
        learning_rate: config.learning_rate,
        seed: config.seed,
        succeeded: result.succeeded,
        trials: result.trials_used,
        wall_time_s,
    }
}

/// Runs every job sequentially. Wall time is not measured here and is
/// reported as zero.
pub fn sweep(
    grid: &[SweepCell],
    seeds_per_cell: usize,
    base: &TrainingConfig,
    env: &EnvConfig,
) -> Result<SweepReport, Error> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let rows = sweep_jobs(grid, seeds_per_cell, base)
        .iter()
        .map(|cfg| train(cfg, env).map(|res| sweep_row(cfg, &res, 0.0)))
        .collect::<Result<_, _>>()?;
    Ok(SweepReport { rows })
}
