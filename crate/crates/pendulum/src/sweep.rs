//! Timed training runs and the (optionally parallel) hyperparameter sweep.

use std::time::Instant;

use pendulum_core::env::EnvConfig;
use pendulum_core::training::{self, SweepCell, SweepReport, TrainingConfig, TrainingResult};
use pendulum_core::Error;
use rayon::prelude::*;

/// [`training::train`] plus its wall-clock duration in seconds.
pub fn train_timed(config: &TrainingConfig, env: &EnvConfig) -> Result<(TrainingResult, f64), Error> {
    let start = Instant::now();
    let result = training::train(config, env)?;
    Ok((result, start.elapsed().as_secs_f64()))
}

/// Trains every `(cell, seed)` combination, seeds `base.seed ..
/// base.seed + seeds_per_cell`. Each run owns its generator, so the rows are
/// identical (apart from wall time) whether or not they run in parallel.
pub fn run_sweep(
    grid: &[SweepCell],
    seeds_per_cell: usize,
    base: &TrainingConfig,
    env: &EnvConfig,
    parallel: bool,
) -> Result<SweepReport, Error> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    base.validate()?;
    env.validate()?;
    let jobs = training::sweep_jobs(grid, seeds_per_cell, base);
    let run = |cfg: &TrainingConfig| {
        train_timed(cfg, env).map(|(res, secs)| training::sweep_row(cfg, &res, secs))
    };
    let rows = if parallel {
        jobs.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, _>>()?
    };
    Ok(SweepReport { rows })
}
