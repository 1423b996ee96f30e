//! Time stepping for the (optionally truncated and mollified) equation,
//! exit-time tracking, energy diagnostics and the mild-form residual check.

mod config;
mod field;
mod mild;
mod step;
mod trajectory;
mod tridiag;

pub use config::{DriftHook, SimConfig, BURGERS_CFL};
pub use field::Field;
pub(crate) use field::h_norm_sq;
pub use mild::mild_residual;
pub use step::{step, PathRunner, Stepper};
pub use trajectory::{energy_record, exit_time, simulate, EnergyRecord, ExitRecord, ObservableSeries, Trajectory};
pub use tridiag::ImplicitDiffusion;
