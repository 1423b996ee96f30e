//! Simulation and diagnostics for a stochastic reaction-diffusion-flux
//! equation on the unit interval with Dirichlet boundary conditions and
//! space-time white noise.

// NaN-rejecting `!(x > 0.0)` guards and index loops over several arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli_io;
pub mod coefficients;
pub mod ergolab;
pub mod error;
pub mod grid_noise;
pub mod heat_kernel;
pub mod solver;
pub mod stats;
pub mod tangent_bel;

pub use error::{Hypothesis, Result, SpdeError};
