//! Physical constants of the rotary-motor cart and pendulum, and the state
//! vector.

use core::ops::Neg;

use crate::Error;

/// Physical model constants. Angles are radians, everything else SI.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParameters {
    /// Viscous damping at the pendulum axis, N·m·s/rad.
    pub b_p: f64,
    /// Equivalent viscous damping at the motor pinion, N·m·s/rad.
    pub b_eq: f64,
    pub g: f64,
    /// Pendulum moment of inertia about its centre of gravity. Not used by
    /// the equations of motion; kept so the parameter table is complete.
    pub i_p: f64,
    /// Pendulum moment of inertia at the hinge. Unused, see `i_p`.
    pub j_p: f64,
    /// Rotor moment of inertia, kg·m².
    pub j_m: f64,
    /// Planetary gearbox ratio.
    pub k_g: f64,
    /// Motor torque constant, N·m/A.
    pub k_t: f64,
    /// Back-EMF constant, V·s/rad.
    pub k_m: f64,
    /// Pivot to centre of gravity, m.
    pub l_p: f64,
    pub m_cart: f64,
    pub m_p: f64,
    /// Armature resistance, Ω.
    pub r_m: f64,
    /// Motor pinion radius, m.
    pub r_mp: f64,
    /// Integration step, s.
    pub h: f64,
    /// Episode ends once |x| exceeds this, m.
    pub track_half_length: f64,
    /// Episode ends once |alpha| exceeds this, rad.
    pub alpha_limit: f64,
}

impl Default for ModelParameters {
    fn default() -> Self {
        ModelParameters {
            b_p: 0.0024,
            b_eq: 5.4,
            g: 9.8,
            i_p: 8.539e-3,
            j_p: 3.344e-2,
            j_m: 3.90e-7,
            k_g: 3.71,
            k_t: 0.00767,
            k_m: 0.00767,
            l_p: 0.3302,
            m_cart: 0.94,
            m_p: 0.230,
            r_m: 2.6,
            r_mp: 6.35e-3,
            h: 1.0 / 50.0,
            track_half_length: 0.4,
            alpha_limit: 12.0_f64.to_radians(),
        }
    }
}

impl ModelParameters {
    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("g", self.g),
            ("i_p", self.i_p),
            ("j_p", self.j_p),
            ("j_m", self.j_m),
            ("k_g", self.k_g),
            ("k_t", self.k_t),
            ("l_p", self.l_p),
            ("m_cart", self.m_cart),
            ("m_p", self.m_p),
            ("r_m", self.r_m),
            ("r_mp", self.r_mp),
            ("h", self.h),
            ("track_half_length", self.track_half_length),
            ("alpha_limit", self.alpha_limit),
        ];
        for (field, value) in positive {
            if !value.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
            if value <= 0.0 {
                return Err(Error::invalid(field, "must be strictly positive"));
            }
        }
        // damping and back-EMF may be switched off entirely
        for (field, value) in [("b_p", self.b_p), ("b_eq", self.b_eq), ("k_m", self.k_m)] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::invalid(field, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// `[x, alpha, x_dot, alpha_dot]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct State {
    /// Cart position, m, rightward positive.
    pub x: f64,
    /// Pole angle from vertical, rad, counterclockwise positive.
    pub alpha: f64,
    pub x_dot: f64,
    pub alpha_dot: f64,
}

impl State {
    pub const ORIGIN: State = State::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(x: f64, alpha: f64, x_dot: f64, alpha_dot: f64) -> Self {
        State {
            x,
            alpha,
            x_dot,
            alpha_dot,
        }
    }

    pub const fn from_array(v: [f64; 4]) -> Self {
        State::new(v[0], v[1], v[2], v[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.x, self.alpha, self.x_dot, self.alpha_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Neg for State {
    type Output = State;

    fn neg(self) -> State {
        State::new(-self.x, -self.alpha, -self.x_dot, -self.alpha_dot)
    }
}

impl From<[f64; 4]> for State {
    fn from(v: [f64; 4]) -> Self {
        State::from_array(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelParameters::default().validate().unwrap();
    }

    #[test]
    fn rejects_non_positive_mass() {
        let p = ModelParameters {
            m_p: 0.0,
            ..Default::default()
        };
        assert_eq!(
            p.validate(),
            Err(Error::invalid("m_p", "must be strictly positive"))
        );
    }

    #[test]
    fn zero_damping_is_allowed() {
        let p = ModelParameters {
            b_p: 0.0,
            b_eq: 0.0,
            k_m: 0.0,
            ..Default::default()
        };
        p.validate().unwrap();
    }

    #[test]
    fn rejects_nan_step() {
        let p = ModelParameters {
            h: f64::NAN,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
