//! One-hidden-layer Gaussian policy: `state -> ReLU(64) -> (mu, sigma)`.
//!
//! The mean head is linear and the standard-deviation head goes through a
//! softplus, so `sigma > 0` for every parameter setting. Gradients are
//! computed by hand; the network is small enough that reverse mode over one
//! episode is a couple of dense loops.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{Action, Controller, EpisodeTrace};
use crate::{Error, State};

pub const INPUTS: usize = 4;
pub const OUTPUTS: usize = 2;
pub const DEFAULT_HIDDEN_WIDTH: usize = 64;

/// Weights and biases, row-major. `w1` is `hidden × 4`, `w2` is `2 × hidden`
/// with row 0 feeding the mean and row 1 the standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; OUTPUTS],
}

/// `dL/dθ` for one episode, shaped like the parameters.
pub type PolicyGradient = PolicyParameters;

impl PolicyParameters {
    pub fn zeros(hidden_width: usize) -> Self {
        PolicyParameters {
            w1: vec![0.0; hidden_width * INPUTS],
            b1: vec![0.0; hidden_width],
            w2: vec![0.0; OUTPUTS * hidden_width],
            b2: [0.0; OUTPUTS],
        }
    }

    /// Zero-mean Gaussian weights with variance `1 / fan_in`; zero biases.
    pub fn init<R: Rng + ?Sized>(hidden_width: usize, rng: &mut R) -> Result<Self, Error> {
        if hidden_width == 0 {
            return Err(Error::invalid("hidden_width", "must be at least 1"));
        }
        let mut p = Self::zeros(hidden_width);
        let scale1 = 1.0 / libm::sqrt(INPUTS as f64);
        let scale2 = 1.0 / libm::sqrt(hidden_width as f64);
        for w in &mut p.w1 {
            *w = scale1 * Distribution::<f64>::sample(&StandardNormal, rng);
        }
        for w in &mut p.w2 {
            *w = scale2 * Distribution::<f64>::sample(&StandardNormal, rng);
        }
        Ok(p)
    }

    /// [`init`](Self::init), then sets the σ-head bias so that σ starts near
    /// `sigma0` everywhere the weights contribute little.
    pub fn init_with_sigma<R: Rng + ?Sized>(
        hidden_width: usize,
        sigma0: f64,
        rng: &mut R,
    ) -> Result<Self, Error> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid("initial_sigma", "must be positive and finite"));
        }
        let mut p = Self::init(hidden_width, rng)?;
        p.b2[1] = softplus_inverse(sigma0);
        Ok(p)
    }

    pub fn hidden_width(&self) -> usize {
        self.b1.len()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let h = self.hidden_width();
        if h == 0 {
            return Err(Error::Empty("b1"));
        }
        if self.w1.len() != h * INPUTS {
            return Err(Error::LengthMismatch {
                what: "w1",
                expected: h * INPUTS,
                got: self.w1.len(),
            });
        }
        if self.w2.len() != OUTPUTS * h {
            return Err(Error::LengthMismatch {
                what: "w2",
                expected: OUTPUTS * h,
                got: self.w2.len(),
            });
        }
        for (field, values) in [
            ("w1", &self.w1[..]),
            ("b1", &self.b1[..]),
            ("w2", &self.w2[..]),
            ("b2", &self.b2[..]),
        ] {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(field, "contains a non-finite entry"));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.w1.len() == other.w1.len()
            && self.b1.len() == other.b1.len()
            && self.w2.len() == other.w2.len()
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// All entries in `w1, b1, w2, b2` order.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + OUTPUTS
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.iter_mut().for_each(|v| *v *= c);
    }
}

/// `N(mu, sigma)` over the raw (pre-saturation) voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mu: f64,
    pub sigma: f64,
}

/// Intermediate values of a forward pass, needed for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: [f64; INPUTS],
    /// Post-ReLU hidden activations.
    pub hidden: Vec<f64>,
    /// Pre-softplus value of the standard-deviation head.
    pub sigma_pre: f64,
}

/// `ln(1 + e^x)` without overflow for large `x`. Floored at the smallest
/// positive normal `f64` so a standard deviation built from it never
/// underflows to zero (below about `x = -708`).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x)).max(f64::MIN_POSITIVE)
    }
}

/// `ln(eʸ − 1)` for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + libm::log1p(-libm::exp(-y))
    } else {
        libm::log(libm::expm1(y))
    }
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn forward(p: &PolicyParameters, s: &State) -> (ActionDistribution, ForwardCache) {
    let input = s.to_array();
    let width = p.hidden_width();
    let mut hidden = vec![0.0; width];
    for (j, h) in hidden.iter_mut().enumerate() {
        let row = &p.w1[j * INPUTS..(j + 1) * INPUTS];
        let z = p.b1[j] + row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>();
        *h = z.max(0.0);
    }
    let (mean_row, std_row) = p.w2.split_at(width);
    let mu = p.b2[0] + mean_row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
    let sigma_pre = p.b2[1] + std_row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>();
    let dist = ActionDistribution {
        mu,
        sigma: softplus(sigma_pre),
    };
    (
        dist,
        ForwardCache {
            input,
            hidden,
            sigma_pre,
        },
    )
}

/// `mu + sigma * z`, `z ~ N(0, 1)`.
pub fn sample<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    dist.mu + dist.sigma * z
}

pub fn clip_action(raw: f64) -> f64 {
    crate::env::clip_voltage(raw)
}

/// Gaussian log-density of `raw` (the pre-clip sample), nats.
pub fn log_prob(dist: &ActionDistribution, raw: f64) -> f64 {
    let z = (raw - dist.mu) / dist.sigma;
    -libm::log(dist.sigma * libm::sqrt(2.0 * PI)) - 0.5 * z * z
}

/// `ln(sigma * sqrt(2 pi e))`.
pub fn entropy(dist: &ActionDistribution) -> f64 {
    libm::log(dist.sigma * libm::sqrt(2.0 * PI * E))
}

/// `L = -Σ R̂_t log π(a_t|s_t) + ε Σ H_t` for a recorded episode, evaluated
/// from scratch with the given parameters.
pub fn episode_objective(
    p: &PolicyParameters,
    states: &[State],
    raw_actions: &[f64],
    returns: &[f64],
    epsilon: f64,
) -> f64 {
    states
        .iter()
        .zip(raw_actions)
        .zip(returns)
        .map(|((s, &a), &r)| {
            let (dist, _) = forward(p, s);
            -r * log_prob(&dist, a) + epsilon * entropy(&dist)
        })
        .sum()
}

/// Exact gradient of [`episode_objective`] by reverse-mode differentiation.
/// The returns are treated as constants.
pub fn backprop_episode(
    p: &PolicyParameters,
    trace: &EpisodeTrace,
    normalized_returns: &[f64],
    epsilon: f64,
) -> Result<PolicyGradient, Error> {
    backprop(p, &trace.states, &trace.raw_actions, normalized_returns, epsilon)
}

/// Same as [`backprop_episode`] on bare state/action slices.
pub fn backprop(
    p: &PolicyParameters,
    states: &[State],
    raw_actions: &[f64],
    returns: &[f64],
    epsilon: f64,
) -> Result<PolicyGradient, Error> {
    if raw_actions.len() != states.len() {
        return Err(Error::LengthMismatch {
            what: "raw_actions",
            expected: states.len(),
            got: raw_actions.len(),
        });
    }
    if returns.len() != states.len() {
        return Err(Error::LengthMismatch {
            what: "normalized_returns",
            expected: states.len(),
            got: returns.len(),
        });
    }
    let width = p.hidden_width();
    let mut grad = PolicyParameters::zeros(width);
    let mut d_hidden = vec![0.0; width];
    for ((s, &a), &ret) in states.iter().zip(raw_actions).zip(returns) {
        let (dist, cache) = forward(p, s);
        let sigma = dist.sigma;
        let diff = a - dist.mu;
        let inv_var = 1.0 / (sigma * sigma);

        // d log_prob / d mu = diff / sigma², d log_prob / d sigma = -1/sigma + diff²/sigma³,
        // d entropy / d sigma = 1/sigma
        let d_mu = -ret * diff * inv_var;
        let d_sigma = -ret * (diff * diff * inv_var - 1.0) / sigma + epsilon / sigma;
        let d_sigma_pre = d_sigma * sigmoid(cache.sigma_pre);

        grad.b2[0] += d_mu;
        grad.b2[1] += d_sigma_pre;
        let (mean_row, std_row) = p.w2.split_at(width);
        let (g_mean_row, g_std_row) = grad.w2.split_at_mut(width);
        for j in 0..width {
            let h = cache.hidden[j];
            g_mean_row[j] += d_mu * h;
            g_std_row[j] += d_sigma_pre * h;
            // ReLU subgradient at 0 taken as 0
            d_hidden[j] = if h > 0.0 {
                d_mu * mean_row[j] + d_sigma_pre * std_row[j]
            } else {
                0.0
            };
        }
        for (j, &dh) in d_hidden.iter().enumerate() {
            if dh == 0.0 {
                continue;
            }
            grad.b1[j] += dh;
            let row = &mut grad.w1[j * INPUTS..(j + 1) * INPUTS];
            for (g, x) in row.iter_mut().zip(&cache.input) {
                *g += dh * x;
            }
        }
    }
    Ok(grad)
}

/// Samples from the policy on every call.
#[derive(Debug, Clone, Copy)]
pub struct StochasticPolicy<'a>(pub &'a PolicyParameters);

impl Controller for StochasticPolicy<'_> {
    fn act(&mut self, state: &State, rng: &mut crate::Rng) -> Action {
        let (dist, _) = forward(self.0, state);
        let raw = sample(&dist, rng);
        Action {
            raw,
            log_prob: log_prob(&dist, raw),
            entropy: entropy(&dist),
        }
    }
}

/// Applies the mean action, never sampling. This is the deployed behaviour.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicPolicy<'a>(pub &'a PolicyParameters);

impl Controller for DeterministicPolicy<'_> {
    fn act(&mut self, state: &State, _rng: &mut crate::Rng) -> Action {
        let (dist, _) = forward(self.0, state);
        Action {
            raw: dist.mu,
            log_prob: log_prob(&dist, dist.mu),
            entropy: entropy(&dist),
        }
    }
}
