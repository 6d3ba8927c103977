//! Nonlinear equations of motion of the motor-driven cart and pendulum, and
//! the semi-implicit Euler update that advances them.
//!
//! The model includes viscous damping at the pendulum axis and at the motor
//! pinion, plus the motor's electrical dynamics (back-EMF and armature
//! resistance), so the control input is a voltage rather than a force.

use nalgebra::{Matrix4, Vector4};

use crate::{ModelParameters, State};

/// Cart and pole accelerations at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Acceleration {
    pub x_ddot: f64,
    pub alpha_ddot: f64,
}

/// `D(alpha) = 4 M r² + Mp r² + 4 Jm Kg² + 3 Mp r² sin²(alpha)`; always
/// strictly positive.
pub fn denominator(p: &ModelParameters, alpha: f64) -> f64 {
    let r2 = p.r_mp * p.r_mp;
    let s = libm::sin(alpha);
    4.0 * p.m_cart * r2 + p.m_p * r2 + 4.0 * p.j_m * p.k_g * p.k_g + 3.0 * p.m_p * r2 * s * s
}

pub fn accelerations(p: &ModelParameters, s: &State, voltage: f64) -> Acceleration {
    let (sin_a, cos_a) = libm::sincos(s.alpha);
    let d = denominator(p, s.alpha);
    let r2 = p.r_mp * p.r_mp;
    let lp = p.l_p;
    // lumped cart-side friction: pinion damping plus back-EMF
    let friction = p.r_m * r2 * p.b_eq + p.k_g * p.k_g * p.k_t * p.k_m;
    let inertia = p.m_cart * r2 + p.m_p * r2 + p.j_m * p.k_g * p.k_g;
    let drive = p.r_mp * p.k_g * p.k_t * voltage;

    let x_ddot = -3.0 * r2 * p.b_p * cos_a * s.alpha_dot / (lp * d)
        - 4.0 * p.m_p * lp * r2 * sin_a * s.alpha_dot * s.alpha_dot / d
        - 4.0 * friction * s.x_dot / (p.r_m * d)
        + 3.0 * p.m_p * r2 * p.g * cos_a * sin_a / d
        + 4.0 * drive / (p.r_m * d);

    let alpha_ddot = -3.0 * inertia * p.b_p * s.alpha_dot / (p.m_p * lp * lp * d)
        - 3.0 * p.m_p * r2 * cos_a * sin_a * s.alpha_dot * s.alpha_dot / d
        - 3.0 * friction * cos_a * s.x_dot / (p.r_m * lp * d)
        + 3.0 * inertia * p.g * sin_a / (lp * d)
        + 3.0 * drive * cos_a / (p.r_m * lp * d);

    Acceleration { x_ddot, alpha_ddot }
}

/// One semi-implicit Euler step of size `p.h`: velocities are advanced from
/// the accelerations at the current state, then positions from the new
/// velocities.
pub fn step(p: &ModelParameters, s: &State, voltage: f64) -> State {
    let acc = accelerations(p, s, voltage);
    let x_dot = s.x_dot + p.h * acc.x_ddot;
    let alpha_dot = s.alpha_dot + p.h * acc.alpha_ddot;
    State {
        x: s.x + p.h * x_dot,
        alpha: s.alpha + p.h * alpha_dot,
        x_dot,
        alpha_dot,
    }
}

/// Continuous-time state derivative `[x_dot, alpha_dot, x_ddot, alpha_ddot]`.
pub fn derivative(p: &ModelParameters, s: &State, voltage: f64) -> Vector4<f64> {
    let acc = accelerations(p, s, voltage);
    Vector4::new(s.x_dot, s.alpha_dot, acc.x_ddot, acc.alpha_ddot)
}

/// Default perturbation used by [`linearize`].
pub const LINEARIZE_DELTA: f64 = 1e-6;

/// Jacobians `(A, B)` of [`derivative`] with respect to state and voltage,
/// by central differences with perturbation `delta`.
pub fn linearize(
    p: &ModelParameters,
    at: &State,
    at_voltage: f64,
    delta: f64,
) -> (Matrix4<f64>, Vector4<f64>) {
    let base = at.to_array();
    let mut a = Matrix4::zeros();
    for j in 0..4 {
        let mut plus = base;
        let mut minus = base;
        plus[j] += delta;
        minus[j] -= delta;
        let col = (derivative(p, &State::from_array(plus), at_voltage)
            - derivative(p, &State::from_array(minus), at_voltage))
            / (2.0 * delta);
        a.set_column(j, &col);
    }
    let b = (derivative(p, at, at_voltage + delta) - derivative(p, at, at_voltage - delta))
        / (2.0 * delta);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn denominator_at_upright() {
        let p = ModelParameters::default();
        // 4(0.94)r² + 0.23 r² + 4(3.9e-7)(3.71)², evaluated offline
        assert!(rel_close(denominator(&p, 0.0), 1.82358771e-4, 1e-9));
    }

    #[test]
    fn denominator_is_pi_periodic() {
        let p = ModelParameters::default();
        for alpha in [-2.0, -0.3, 0.0, 0.1, 1.0, 2.5] {
            assert!(rel_close(denominator(&p, alpha), denominator(&p, alpha + PI), 1e-12));
        }
    }

    #[test]
    fn denominator_at_horizontal() {
        let p = ModelParameters::default();
        let expected = denominator(&p, 0.0) + 3.0 * p.m_p * p.r_mp * p.r_mp;
        assert!(rel_close(denominator(&p, FRAC_PI_2), expected, 1e-12));
        assert!(rel_close(expected, 2.10181296e-4, 1e-9));
    }

    #[test]
    fn origin_at_rest_has_no_acceleration() {
        let p = ModelParameters::default();
        let acc = accelerations(&p, &State::ORIGIN, 0.0);
        assert_eq!(acc, Acceleration::default());
    }

    #[test]
    fn unit_voltage_at_origin() {
        let p = ModelParameters::default();
        let acc = accelerations(&p, &State::ORIGIN, 1.0);
        // only the voltage terms survive; values from a 30-digit evaluation
        assert!(rel_close(acc.x_ddot, 1.5244141999618982, 1e-12));
        assert!(rel_close(acc.alpha_ddot, 3.462_479_254_910_429, 1e-12));
    }

    #[test]
    fn joint_sign_flip_negates_accelerations() {
        let p = ModelParameters::default();
        let s = State::new(0.1, -0.07, 0.4, 1.3);
        let a = accelerations(&p, &s, 3.5);
        let b = accelerations(&p, &-s, -3.5);
        assert!(rel_close(a.x_ddot, -b.x_ddot, 1e-12));
        assert!(rel_close(a.alpha_ddot, -b.alpha_ddot, 1e-12));
    }

    #[test]
    fn step_keeps_equilibrium() {
        let p = ModelParameters::default();
        assert_eq!(step(&p, &State::ORIGIN, 0.0), State::ORIGIN);
    }

    #[test]
    fn position_uses_updated_velocity() {
        let p = ModelParameters::default();
        let next = step(&p, &State::new(0.0, 0.0, 1.0, 0.0), 0.0);
        // x_ddot = -11.6073..., so x_dot' = 1 + h x_ddot and x' = h x_dot'
        assert!(rel_close(next.x_dot, 0.7678532682587557, 1e-12));
        assert!(rel_close(next.x, 0.015357065365175114, 1e-12));
        assert!(rel_close(next.alpha_dot, -0.5272866408417118, 1e-12));
        assert!(rel_close(next.alpha, -0.010545732816834235, 1e-12));
        // explicit Euler would have moved the cart by exactly h
        assert!((next.x - p.h).abs() > 1e-3);
    }

    #[test]
    fn linearization_at_origin() {
        let p = ModelParameters::default();
        let (a, b) = linearize(&p, &State::ORIGIN, 0.0, LINEARIZE_DELTA);
        assert_eq!(a.row(0).iter().copied().collect::<alloc::vec::Vec<_>>(), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(a.row(1).iter().copied().collect::<alloc::vec::Vec<_>>(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[1], 0.0);
        // d x_ddot / d alpha = 3 Mp r² g / D(0)
        let analytic = 3.0 * p.m_p * p.r_mp * p.r_mp * p.g / denominator(&p, 0.0);
        assert!(rel_close(analytic, 1.4951885423706875, 1e-12));
        assert!(rel_close(a[(2, 1)], analytic, 1e-7));
        assert!(rel_close(b[2], 1.5244141999618982, 1e-7));
    }
}
