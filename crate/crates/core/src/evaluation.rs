//! Judging a trained or hand-designed controller: balance rate from random
//! starts, the long unperturbed balance run and the calibrated tap.

use crate::env::{self, Controller, Disturbance, EnvConfig, EpisodeTrace};
use crate::policy::{DeterministicPolicy, PolicyParameters, StochasticPolicy};
use crate::{seeded_rng, Error, State};

/// Steps covering `seconds` at step size `h`, rounded to the nearest step.
pub fn steps_for(seconds: f64, h: f64) -> usize {
    let n = libm::round(seconds / h);
    if n > 0.0 {
        n as usize
    } else {
        0
    }
}

/// Largest |alpha| over the states reached after step `from` (inclusive of
/// the state the step starts in), rad.
pub fn peak_alpha_from(trace: &EpisodeTrace, from: usize) -> f64 {
    let pre = trace.states.iter().skip(from).map(|s| s.alpha.abs());
    let post = trace.post_states().skip(from).map(|s| s.alpha.abs());
    pre.chain(post).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceReport {
    pub episodes: usize,
    pub balanced: usize,
    pub mean_steps: f64,
}

impl BalanceReport {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.balanced as f64 / self.episodes as f64
        }
    }
}

/// Runs `episodes` rollouts from random initial states and counts those
/// that survive all `max_steps`.
pub fn balance_rate(
    params: &PolicyParameters,
    env: &EnvConfig,
    episodes: usize,
    max_steps: usize,
    deterministic: bool,
    seed: u64,
) -> Result<BalanceReport, Error> {
    params.validate()?;
    env.validate()?;
    if episodes == 0 {
        return Err(Error::invalid("episodes", "must be at least 1"));
    }
    let mut rng = seeded_rng(seed);
    let mut balanced = 0;
    let mut total_steps = 0;
    for _ in 0..episodes {
        let trace = if deterministic {
            env::rollout(env, &mut DeterministicPolicy(params), &mut rng, max_steps, &[])
        } else {
            env::rollout(env, &mut StochasticPolicy(params), &mut rng, max_steps, &[])
        };
        total_steps += trace.total_reward() as usize;
        if !trace.terminated {
            balanced += 1;
        }
    }
    Ok(BalanceReport {
        episodes,
        balanced,
        mean_steps: total_steps as f64 / episodes as f64,
    })
}

/// Outcome of a long run from a fixed start.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldReport {
    pub trace: EpisodeTrace,
    /// Peak |alpha| once the settling window has passed, rad.
    pub peak_alpha_after_settle: f64,
}

impl HoldReport {
    pub fn survived(&self) -> bool {
        !self.trace.terminated
    }
}

/// Runs `controller` from `start` for `steps` steps and measures the worst
/// angle after `settle_steps`.
pub fn hold<C: Controller + ?Sized>(
    env: &EnvConfig,
    start: State,
    controller: &mut C,
    steps: usize,
    settle_steps: usize,
    disturbances: &[Disturbance],
) -> HoldReport {
    // deterministic controllers ignore the generator
    let mut rng = seeded_rng(0);
    let trace = env::rollout_from(env, start, controller, &mut rng, steps, disturbances);
    let peak_alpha_after_settle = peak_alpha_from(&trace, settle_steps);
    HoldReport {
        trace,
        peak_alpha_after_settle,
    }
}

/// The smallest tap found by bisection and what it does to the pole.
#[derive(Debug, Clone, PartialEq)]
pub struct TapCalibration {
    /// Angular velocity kick, rad/s, positive.
    pub delta_alpha_dot: f64,
    /// Peak |alpha| from the tap onwards, rad.
    pub peak_alpha: f64,
    pub report: HoldReport,
}

impl TapCalibration {
    pub fn recovered(&self) -> bool {
        self.report.survived()
    }
}

const TAP_START: f64 = 0.05;
const TAP_MAX: f64 = 50.0;
const TAP_BISECTIONS: usize = 60;

/// Finds by bisection the smallest positive angular-velocity impulse at step
/// `at_step` that drives the pole at least `target_alpha` (rad) from
/// vertical, then reports the full run of `steps` steps with that impulse.
/// The controller is cloned fresh for every trial run and should be
/// deterministic.
///
/// Fails if no impulse up to 50 rad/s reaches the target or the run ends
/// before the impulse is applied.
pub fn calibrate_tap<C: Controller + Clone>(
    controller: &C,
    env: &EnvConfig,
    start: State,
    steps: usize,
    at_step: usize,
    target_alpha: f64,
) -> Result<TapCalibration, Error> {
    if at_step >= steps {
        return Err(Error::invalid("at_step", "must fall inside the run"));
    }
    if !(target_alpha > 0.0) {
        return Err(Error::invalid("target_alpha", "must be positive"));
    }
    let run = |delta: f64| {
        let d = Disturbance {
            at_step,
            delta_alpha_dot: delta,
        };
        hold(env, start, &mut controller.clone(), steps, at_step, &[d])
    };
    let reaches = |r: &HoldReport| r.trace.len() > at_step && r.peak_alpha_after_settle >= target_alpha;

    if run(0.0).trace.len() <= at_step {
        return Err(Error::invalid("at_step", "the run ends before the impulse"));
    }
    let mut lo = 0.0;
    let mut hi = TAP_START;
    let mut hi_report = run(hi);
    while !reaches(&hi_report) {
        lo = hi;
        hi *= 2.0;
        if hi > TAP_MAX {
            return Err(Error::invalid("target_alpha", "not reachable with a bounded impulse"));
        }
        hi_report = run(hi);
    }
    for _ in 0..TAP_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = run(mid);
        if reaches(&r) {
            hi = mid;
            hi_report = r;
        } else {
            lo = mid;
        }
    }
    Ok(TapCalibration {
        delta_alpha_dot: hi,
        peak_alpha: hi_report.peak_alpha_after_settle,
        report: hi_report,
    })
}
