use nalgebra::{DMatrix, Matrix4, RowVector4, Vector4};

use super::riccati::{care_residual, solve_riccati};
use crate::dynamics::{linearize, LINEARIZE_DELTA};
use crate::env::{Action, Controller};
use crate::{env, Error, ModelParameters, State};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LqrConfig {
    /// State cost, row-major.
    pub q: [[f64; 4]; 4],
    /// Voltage cost.
    pub r: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        LqrConfig {
            q: [
                [5.0, 0.0, 0.0, 0.0],
                [0.0, 50.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
            r: 1.0,
        }
    }
}

impl LqrConfig {
    pub fn q_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.q[i][j])
    }

    /// `q` must be symmetric positive semidefinite and `r` positive.
    pub fn validate(&self) -> Result<(), Error> {
        let q = self.q_matrix();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("q", "contains a non-finite entry"));
        }
        let scale = q.norm().max(1.0);
        if (q - q.transpose()).norm() > 1e-12 * scale {
            return Err(Error::invalid("q", "must be symmetric"));
        }
        let min_eig = q.symmetric_eigenvalues().min();
        if min_eig < -1e-12 * scale {
            return Err(Error::invalid("q", "must be positive semidefinite"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("r", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Everything produced while designing the regulator.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrDesign {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub gain: RowVector4<f64>,
    pub residual: f64,
    /// Largest real part among the eigenvalues of `A - B K`.
    pub closed_loop_max_real: f64,
}

/// Linearises at the upright equilibrium with zero voltage, solves the
/// Riccati equation and checks that the resulting loop is stable.
pub fn design_lqr(params: &ModelParameters, config: &LqrConfig) -> Result<LqrDesign, Error> {
    params.validate()?;
    config.validate()?;
    let (a, b) = linearize(params, &State::ORIGIN, 0.0, LINEARIZE_DELTA);
    let q = config.q_matrix();
    let p = solve_riccati(&a, &b, &q, config.r)?;
    let gain = b.transpose() * p / config.r;
    let residual = care_residual(
        &DMatrix::from_column_slice(4, 4, a.as_slice()),
        &DMatrix::from_column_slice(4, 1, b.as_slice()),
        &DMatrix::from_column_slice(4, 4, q.as_slice()),
        config.r,
        &DMatrix::from_column_slice(4, 4, p.as_slice()),
    );
    let closed = a - b * gain;
    let closed_loop_max_real = closed
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(closed_loop_max_real < 0.0) {
        return Err(Error::Unstabilized {
            max_real: closed_loop_max_real,
        });
    }
    Ok(LqrDesign {
        a,
        b,
        p,
        gain,
        residual,
        closed_loop_max_real,
    })
}

/// `u = -K s`, saturated.
pub fn lqr_control(gain: &RowVector4<f64>, s: &State) -> f64 {
    let x = Vector4::from(s.to_array());
    env::clip_voltage(-(gain * x)[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrController {
    pub gain: RowVector4<f64>,
}

impl Controller for LqrController {
    fn act(&mut self, s: &State, _rng: &mut crate::Rng) -> Action {
        Action::deterministic(lqr_control(&self.gain, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_zero_voltage() {
        let k = RowVector4::new(-3.0, 40.0, -5.0, 6.0);
        assert_eq!(lqr_control(&k, &State::ORIGIN), 0.0);
    }

    #[test]
    fn control_is_linear_before_clipping() {
        let k = RowVector4::new(-3.0, 40.0, -5.0, 6.0);
        let s = State::new(0.01, 0.005, -0.02, 0.01);
        let twice = State::new(0.02, 0.01, -0.04, 0.02);
        assert!((lqr_control(&k, &twice) - 2.0 * lqr_control(&k, &s)).abs() < 1e-12);
    }

    #[test]
    fn default_design_is_stable() {
        let d = design_lqr(&ModelParameters::default(), &LqrConfig::default()).unwrap();
        assert!(d.residual < 1e-8, "residual {}", d.residual);
        assert!(d.closed_loop_max_real < 0.0);
        assert!((d.p - d.p.transpose()).norm() < 1e-10 * d.p.norm());
    }

    #[test]
    fn rejects_asymmetric_q() {
        let mut cfg = LqrConfig::default();
        cfg.q[0][1] = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_indefinite_q() {
        let mut cfg = LqrConfig::default();
        cfg.q[2][2] = -1.0;
        assert!(cfg.validate().is_err());
    }
}
