//! Episode semantics: initial-state sampling, termination, reward, tap
//! disturbances and full rollouts.

use alloc::vec::Vec;

use rand::Rng;

use crate::{dynamics, Error, ModelParameters, State, VOLTAGE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvConfig {
    pub params: ModelParameters,
    /// Initial cart position is uniform in `(-b, b)`, m.
    pub init_x_bound: f64,
    /// Initial pole angle is uniform in `(-b, b)`, rad.
    pub init_alpha_bound: f64,
    /// Bound for both initial velocities; zero means start at rest.
    pub init_velocity_bound: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let params = ModelParameters::default();
        EnvConfig {
            params,
            init_x_bound: params.track_half_length,
            init_alpha_bound: params.alpha_limit,
            init_velocity_bound: 0.0,
            max_steps: 500,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.params.validate()?;
        for (field, v) in [
            ("init_x_bound", self.init_x_bound),
            ("init_alpha_bound", self.init_alpha_bound),
            ("init_velocity_bound", self.init_velocity_bound),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(field, "must be finite and non-negative"));
            }
        }
        if self.init_x_bound > self.params.track_half_length {
            return Err(Error::invalid("init_x_bound", "exceeds track_half_length"));
        }
        if self.init_alpha_bound > self.params.alpha_limit {
            return Err(Error::invalid("init_alpha_bound", "exceeds alpha_limit"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Instantaneous tap on the pole, applied to the state seen at `at_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Disturbance {
    pub at_step: usize,
    /// Added to the angular velocity, rad/s.
    pub delta_alpha_dot: f64,
}

impl Disturbance {
    /// Schedules a tap at time `time_s`, rounded to the nearest step.
    pub fn at_time(time_s: f64, delta_alpha_dot: f64, h: f64) -> Self {
        Disturbance {
            at_step: libm::round(time_s / h).max(0.0) as usize,
            delta_alpha_dot,
        }
    }
}

fn symmetric_uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..bound)
    } else {
        0.0
    }
}

/// Draws an initial state uniformly from the configured box.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> State {
    let x = symmetric_uniform(rng, config.init_x_bound);
    let alpha = symmetric_uniform(rng, config.init_alpha_bound);
    let x_dot = symmetric_uniform(rng, config.init_velocity_bound);
    let alpha_dot = symmetric_uniform(rng, config.init_velocity_bound);
    State::new(x, alpha, x_dot, alpha_dot)
}

/// True once the cart has left the track or the pole has tipped past the
/// angle limit. Both bounds are strict. A non-finite state (from a NaN
/// voltage, say) also ends the episode.
pub fn is_terminal(config: &EnvConfig, s: &State) -> bool {
    !s.is_finite()
        || s.x.abs() > config.params.track_half_length
        || s.alpha.abs() > config.params.alpha_limit
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: State,
    pub reward: f64,
    pub terminated: bool,
}

/// Advances one step. Reward is 1 if the post-step state is still inside
/// bounds and 0 on the step that leaves them.
pub fn transition(config: &EnvConfig, s: &State, voltage: f64) -> Transition {
    let next = dynamics::step(&config.params, s, voltage);
    let terminated = is_terminal(config, &next);
    Transition {
        next,
        reward: if terminated { 0.0 } else { 1.0 },
        terminated,
    }
}

pub fn apply_disturbance(s: &State, d: &Disturbance) -> State {
    State {
        alpha_dot: s.alpha_dot + d.delta_alpha_dot,
        ..*s
    }
}

/// What a controller decided for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    /// Value before saturation.
    pub raw: f64,
    /// Log-likelihood of `raw` under the controller, nats. Zero for
    /// deterministic controllers.
    pub log_prob: f64,
    /// Entropy of the action distribution, nats. Zero for deterministic
    /// controllers.
    pub entropy: f64,
}

impl Action {
    pub fn deterministic(voltage: f64) -> Self {
        Action {
            raw: voltage,
            log_prob: 0.0,
            entropy: 0.0,
        }
    }
}

/// Anything that maps a state to a voltage, possibly at random.
pub trait Controller {
    fn act(&mut self, state: &State, rng: &mut crate::Rng) -> Action;
}

impl<F: FnMut(&State) -> f64> Controller for F {
    fn act(&mut self, state: &State, _rng: &mut crate::Rng) -> Action {
        Action::deterministic(self(state))
    }
}

/// Per-step record of an episode. Entry `t` holds the state the controller
/// saw, its action, and the reward for the resulting transition; the state
/// after the last step is `final_state`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub states: Vec<State>,
    pub raw_actions: Vec<f64>,
    pub voltages: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub rewards: Vec<f64>,
    pub terminated: bool,
    pub final_state: State,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Undiscounted return, i.e. the number of surviving steps.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// State after step `t`.
    pub fn state_after(&self, t: usize) -> State {
        self.states.get(t + 1).copied().unwrap_or(self.final_state)
    }

    /// Iterator over post-step states, one per recorded step.
    pub fn post_states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(move |t| self.state_after(t))
    }

    fn push(&mut self, state: State, action: Action, voltage: f64, reward: f64) {
        self.states.push(state);
        self.raw_actions.push(action.raw);
        self.voltages.push(voltage);
        self.log_probs.push(action.log_prob);
        self.entropies.push(action.entropy);
        self.rewards.push(reward);
    }
}

pub fn clip_voltage(raw: f64) -> f64 {
    raw.clamp(-VOLTAGE_LIMIT, VOLTAGE_LIMIT)
}

/// Runs `controller` from `start` for at most `max_steps` steps, stopping
/// early on termination. Disturbances scheduled for step `t` are added to the
/// state before the controller observes it.
pub fn rollout_from<C: Controller + ?Sized>(
    config: &EnvConfig,
    start: State,
    controller: &mut C,
    rng: &mut crate::Rng,
    max_steps: usize,
    disturbances: &[Disturbance],
) -> EpisodeTrace {
    let mut trace = EpisodeTrace {
        final_state: start,
        ..Default::default()
    };
    let mut state = start;
    for t in 0..max_steps {
        for d in disturbances.iter().filter(|d| d.at_step == t) {
            state = apply_disturbance(&state, d);
        }
        let action = controller.act(&state, rng);
        let voltage = clip_voltage(action.raw);
        let tr = transition(config, &state, voltage);
        trace.push(state, action, voltage, tr.reward);
        state = tr.next;
        if tr.terminated {
            trace.terminated = true;
            break;
        }
    }
    trace.final_state = state;
    trace
}

/// [`reset`] followed by [`rollout_from`].
pub fn rollout<C: Controller + ?Sized>(
    config: &EnvConfig,
    controller: &mut C,
    rng: &mut crate::Rng,
    max_steps: usize,
    disturbances: &[Disturbance],
) -> EpisodeTrace {
    let start = reset(config, rng);
    rollout_from(config, start, controller, rng, max_steps, disturbances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn still() -> EnvConfig {
        EnvConfig {
            init_x_bound: 0.0,
            init_alpha_bound: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_bounds_reset_to_origin() {
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            assert_eq!(reset(&still(), &mut rng), State::ORIGIN);
        }
    }

    #[test]
    fn reset_stays_inside_bounds() {
        let cfg = EnvConfig::default();
        let limit = 12.0_f64.to_radians();
        let mut rng = seeded_rng(11);
        for _ in 0..1_000_000 {
            let s = reset(&cfg, &mut rng);
            assert!(s.x.abs() < 0.4);
            assert!(s.alpha.abs() < limit);
            assert_eq!((s.x_dot, s.alpha_dot), (0.0, 0.0));
        }
    }

    #[test]
    fn reset_is_seeded() {
        let cfg = EnvConfig::default();
        assert_eq!(reset(&cfg, &mut seeded_rng(5)), reset(&cfg, &mut seeded_rng(5)));
    }

    #[test]
    fn termination_bounds() {
        let cfg = EnvConfig::default();
        assert!(!is_terminal(&cfg, &State::ORIGIN));
        assert!(is_terminal(&cfg, &State::new(0.41, 0.0, 0.0, 0.0)));
        assert!(is_terminal(&cfg, &State::new(0.0, 12.5_f64.to_radians(), 0.0, 0.0)));
        assert!(is_terminal(&cfg, &State::new(-0.41, 0.0, 0.0, 0.0)));
        assert!(!is_terminal(&cfg, &State::new(0.4, 0.0, 0.0, 0.0)));
    }

    #[test]
    fn nan_voltage_ends_the_episode() {
        let cfg = EnvConfig::default();
        let tr = transition(&cfg, &State::ORIGIN, f64::NAN);
        assert!(tr.terminated);
        assert_eq!(tr.reward, 0.0);
    }

    #[test]
    fn transition_near_equilibrium_survives() {
        let cfg = EnvConfig::default();
        let tr = transition(&cfg, &State::new(0.01, 0.01, 0.0, 0.0), 0.0);
        assert_eq!(tr.reward, 1.0);
        assert!(!tr.terminated);
    }

    #[test]
    fn transition_off_the_track_terminates() {
        let cfg = EnvConfig::default();
        let tr = transition(&cfg, &State::new(0.399, 0.0, 2.0, 0.0), 10.0);
        assert!(tr.next.x > 0.4);
        assert!(tr.terminated);
        assert_eq!(tr.reward, 0.0);
    }

    #[test]
    fn disturbance_is_additive() {
        let d = |v| Disturbance {
            at_step: 0,
            delta_alpha_dot: v,
        };
        let s = State::new(0.1, 0.2, 0.3, 0.4);
        assert_eq!(apply_disturbance(&s, &d(0.0)), s);
        assert_eq!(
            apply_disturbance(&State::ORIGIN, &d(0.5)),
            State::new(0.0, 0.0, 0.0, 0.5)
        );
        let twice = apply_disturbance(&apply_disturbance(&s, &d(0.25)), &d(0.5));
        assert!((twice.alpha_dot - (0.4 + 0.75)).abs() < 1e-15);
        assert_eq!((twice.x, twice.alpha, twice.x_dot), (s.x, s.alpha, s.x_dot));
    }

    #[test]
    fn passive_pole_falls() {
        let cfg = EnvConfig::default();
        let mut rng = seeded_rng(0);
        let start = State::new(0.0, 2.0_f64.to_radians(), 0.0, 0.0);
        let trace = rollout_from(&cfg, start, &mut |_: &State| 0.0, &mut rng, 10_000, &[]);
        assert!(trace.terminated);
        assert!(trace.len() < 200);
        assert!(trace.final_state.alpha.abs() > cfg.params.alpha_limit);
        assert_eq!(trace.rewards.last(), Some(&0.0));
        assert_eq!(trace.total_reward() as usize, trace.len() - 1);
    }

    #[test]
    fn single_step_rollout() {
        let cfg = EnvConfig::default();
        let mut rng = seeded_rng(0);
        let trace = rollout(&cfg, &mut |_: &State| 0.0, &mut rng, 1, &[]);
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn rollout_matches_chained_transitions() {
        let cfg = EnvConfig::default();
        let mut rng = seeded_rng(0);
        let mut ctl = |s: &State| 30.0 * s.alpha + 2.0 * s.alpha_dot;
        let start = State::new(0.05, 0.03, 0.0, 0.0);
        let trace = rollout_from(&cfg, start, &mut ctl, &mut rng, 50, &[]);
        let mut s = start;
        for t in 0..trace.len() {
            assert_eq!(trace.states[t], s);
            let tr = transition(&cfg, &s, clip_voltage(ctl(&s)));
            assert_eq!(trace.rewards[t], tr.reward);
            s = tr.next;
        }
        assert_eq!(trace.final_state, s);
    }

    #[test]
    fn disturbance_seen_by_controller() {
        let cfg = still();
        let mut rng = seeded_rng(0);
        let mut seen = Vec::new();
        let mut ctl = |s: &State| {
            seen.push(*s);
            0.0
        };
        let d = [Disturbance {
            at_step: 3,
            delta_alpha_dot: 0.5,
        }];
        rollout_from(&cfg, State::ORIGIN, &mut ctl, &mut rng, 5, &d);
        assert_eq!(seen[2], State::ORIGIN);
        assert_eq!(seen[3].alpha_dot, 0.5);
    }

    #[test]
    fn voltages_are_saturated() {
        let cfg = EnvConfig::default();
        let mut rng = seeded_rng(0);
        let trace = rollout(&cfg, &mut |_: &State| 25.0, &mut rng, 20, &[]);
        assert!(trace.voltages.iter().all(|v| v.abs() <= VOLTAGE_LIMIT));
        assert_eq!(trace.raw_actions[0], 25.0);
    }
}
