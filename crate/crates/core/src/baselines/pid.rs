use crate::env::{Action, Controller};
use crate::{Error, State, VOLTAGE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidConfig {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    /// Target pole angle, rad.
    pub setpoint: f64,
    pub output_min: f64,
    pub output_max: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            k_p: 60.0,
            k_i: 0.0,
            k_d: 4.0,
            setpoint: 0.0,
            output_min: -VOLTAGE_LIMIT,
            output_max: VOLTAGE_LIMIT,
        }
    }
}

impl PidConfig {
    pub fn validate(&self) -> Result<(), Error> {
        for (field, v) in [
            ("k_p", self.k_p),
            ("k_i", self.k_i),
            ("k_d", self.k_d),
            ("setpoint", self.setpoint),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if !(self.output_min < self.output_max) {
            return Err(Error::invalid("output_min", "must be below output_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    /// Rectangle-rule integral of the error, rad·s.
    pub integral: f64,
    pub prev_error: f64,
}

/// One controller tick. The integral is frozen on ticks where the output
/// saturates.
pub fn pid_step(config: &PidConfig, state: &PidState, error: f64, h: f64) -> (f64, PidState) {
    let integral = state.integral + error * h;
    let derivative = (error - state.prev_error) / h;
    let raw = config.k_p * error + config.k_i * integral + config.k_d * derivative;
    let out = raw.clamp(config.output_min, config.output_max);
    let next = PidState {
        integral: if out == raw { integral } else { state.integral },
        prev_error: error,
    };
    (out, next)
}

/// Stateful PID acting on `setpoint - alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidController {
    pub config: PidConfig,
    pub state: PidState,
    pub h: f64,
}

impl PidController {
    pub fn new(config: PidConfig, h: f64) -> Self {
        PidController {
            config,
            state: PidState::default(),
            h,
        }
    }
}

impl Controller for PidController {
    fn act(&mut self, s: &State, _rng: &mut crate::Rng) -> Action {
        let (u, next) = pid_step(&self.config, &self.state, self.config.setpoint - s.alpha, self.h);
        self.state = next;
        Action::deterministic(u)
    }
}
