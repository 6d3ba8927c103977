//! Classical reference controllers: PID on the pole angle and LQR state
//! feedback around the upright equilibrium.

mod lqr;
mod pid;
mod riccati;

pub use lqr::{design_lqr, lqr_control, LqrConfig, LqrController, LqrDesign};
pub use pid::{pid_step, PidConfig, PidController, PidState};
pub use riccati::{care_residual, solve_care, solve_riccati};
