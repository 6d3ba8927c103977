//! File formats, sweeps and the command line on top of `pendulum-core`.

pub mod archive;
pub mod cli;
pub mod formats;
pub mod sweep;

pub use pendulum_core as core;
