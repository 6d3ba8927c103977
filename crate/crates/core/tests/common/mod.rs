//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use pendulum_core::policy::{episode_objective, PolicyParameters, INPUTS};
use pendulum_core::{ModelParameters, State};
use rand::Rng;

/// Value plus the sum of absolute values of the terms that produced it, so
/// comparisons can use a tolerance relative to the work done rather than to
/// a result that may have cancelled to near zero.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub value: f64,
    pub scale: f64,
}

fn sum(terms: &[f64]) -> Scaled {
    Scaled {
        value: terms.iter().sum(),
        scale: terms.iter().map(|t| t.abs()).sum(),
    }
}

/// The cart-pole accelerations written out term by term straight from the
/// published equations, with no shared subexpressions.
pub fn oracle_accelerations(p: &ModelParameters, s: &State, vm: f64) -> (Scaled, Scaled) {
    let (big_m, mp, lp, r, bp, beq, g) = (p.m_cart, p.m_p, p.l_p, p.r_mp, p.b_p, p.b_eq, p.g);
    let (jm, kg, kt, km, rm) = (p.j_m, p.k_g, p.k_t, p.k_m, p.r_m);
    let (a, ad, xd) = (s.alpha, s.alpha_dot, s.x_dot);
    let d = 4.0 * big_m * r * r + mp * r * r + 4.0 * jm * kg * kg + 3.0 * mp * r * r * a.sin() * a.sin();

    let x_ddot = sum(&[
        -(3.0 * r * r * bp * a.cos() * ad) / (lp * d),
        -(4.0 * mp * lp * r * r * a.sin() * ad * ad) / d,
        -(4.0 * (rm * r * r * beq + kg * kg * kt * km) * xd) / (rm * d),
        (3.0 * mp * r * r * g * a.cos() * a.sin()) / d,
        (4.0 * r * kg * kt * vm) / (rm * d),
    ]);
    let alpha_ddot = sum(&[
        -(3.0 * (big_m * r * r + mp * r * r + jm * kg * kg) * bp * ad) / (mp * lp * lp * d),
        -(3.0 * mp * r * r * a.cos() * a.sin() * ad * ad) / d,
        -(3.0 * (rm * r * r * beq + kg * kg * kt * km) * a.cos() * xd) / (rm * lp * d),
        (3.0 * (big_m * r * r + mp * r * r + jm * kg * kg) * g * a.sin()) / (lp * d),
        (3.0 * r * kg * kt * a.cos() * vm) / (rm * lp * d),
    ]);
    (x_ddot, alpha_ddot)
}

/// One semi-implicit Euler step, velocities first. Each component comes
/// with its rounding scale.
pub fn oracle_step(p: &ModelParameters, s: &State, vm: f64) -> [Scaled; 4] {
    let (xdd, add) = oracle_accelerations(p, s, vm);
    let h = p.h;
    let xd1 = s.x_dot + h * xdd.value;
    let ad1 = s.alpha_dot + h * add.value;
    let xd_scale = s.x_dot.abs() + h * xdd.scale;
    let ad_scale = s.alpha_dot.abs() + h * add.scale;
    [
        Scaled {
            value: s.x + h * xd1,
            scale: s.x.abs() + h * xd_scale,
        },
        Scaled {
            value: s.alpha + h * ad1,
            scale: s.alpha.abs() + h * ad_scale,
        },
        Scaled {
            value: xd1,
            scale: xd_scale,
        },
        Scaled {
            value: ad1,
            scale: ad_scale,
        },
    ]
}

/// `|got - want| / max(|want|, scale)`.
pub fn scaled_error(got: f64, want: Scaled) -> f64 {
    let denom = want.value.abs().max(want.scale);
    if denom == 0.0 {
        got.abs()
    } else {
        (got - want.value).abs() / denom
    }
}

/// `R_t = Σ_k γ^k r_{t+k}` by the quadratic double loop.
pub fn brute_force_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| {
            let mut total = 0.0;
            let mut discount = 1.0;
            for r in &rewards[t..] {
                total += discount * r;
                discount *= gamma;
            }
            total
        })
        .collect()
}

pub fn random_state<R: Rng>(rng: &mut R) -> State {
    State::new(
        rng.random_range(-0.4..0.4),
        rng.random_range(-0.21..0.21),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    )
}

/// Central finite-difference gradient of the episode objective, fourth
/// order. Steps on first-layer parameters are shrunk so that no ReLU
/// changes side within the stencil.
pub fn finite_difference_gradient(
    p: &PolicyParameters,
    states: &[State],
    actions: &[f64],
    returns: &[f64],
    epsilon: f64,
) -> Vec<f64> {
    let width = p.hidden_width();
    let n_w1 = width * INPUTS;
    let objective = |q: &PolicyParameters| episode_objective(q, states, actions, returns, epsilon);
    (0..p.len())
        .map(|i| {
            let mut step: f64 = 1e-3;
            if i < n_w1 + width {
                let (j, input) = if i < n_w1 { (i / INPUTS, Some(i % INPUTS)) } else { (i - n_w1, None) };
                for s in states {
                    let x = s.to_array();
                    let z = p.b1[j] + (0..INPUTS).map(|c| p.w1[j * INPUTS + c] * x[c]).sum::<f64>();
                    let sensitivity = input.map_or(1.0, |k| x[k].abs());
                    if sensitivity > 0.0 {
                        step = step.min(0.4 * z.abs() / sensitivity);
                    }
                }
            }
            let at = |k: f64| {
                let mut q = p.clone();
                *q.iter_mut().nth(i).unwrap() += k * step;
                objective(&q)
            };
            (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * step)
        })
        .collect()
}

/// Largest relative error over coordinates where either gradient exceeds
/// `floor` in magnitude.
pub fn worst_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a.abs().max(n.abs()), (a - n).abs()))
        .filter(|&(size, _)| size > floor)
        .map(|(size, diff)| diff / size)
        .fold(0.0, f64::max)
}
