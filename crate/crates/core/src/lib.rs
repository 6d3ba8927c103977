//! Cart-pole balancing with a Gaussian neural policy trained by vanilla policy
//! gradient, plus PID and LQR reference controllers.
//!
//! Everything in this crate is pure computation: no files, no clocks, no
//! threads. It builds without `std` (only `alloc` is required); the companion
//! `pendulum` crate adds persistence, parallel sweeps and the command line.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod dynamics;
pub mod env;
pub mod evaluation;
mod error;
pub mod params;
pub mod policy;
pub mod training;

pub use error::Error;
pub use params::{ModelParameters, State};

/// Motor voltage saturation, volts.
pub const VOLTAGE_LIMIT: f64 = 10.0;

/// Seedable random source used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's random source from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
