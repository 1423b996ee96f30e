use crate::coefficients::{CoefficientSet, TruncationGate};
use crate::error::{Result, SpdeError};
use crate::grid_noise::{fill_panel, NoiseIncrement, RngStream, SpatialGrid};

use super::field::h_norm_sq;
use super::tridiag::ImplicitDiffusion;
use super::{Field, SimConfig};

/// Semi-implicit Euler–Maruyama step for
/// `∂_t u = ∂²_x u + κ b(u) + ∂_x(κ g(u)) + σ(u) Ẇ`.
///
/// Diffusion is implicit; reaction, flux and noise are explicit. The flux
/// derivative is the backward difference `(κ g(u_i) - κ g(u_{i-1})) / dx`
/// with `u_0 = 0`.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub(crate) grid: SpatialGrid,
    pub(crate) dt: f64,
    pub(crate) coefficients: CoefficientSet,
    pub(crate) gate: Option<TruncationGate>,
    diffusion: ImplicitDiffusion,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        Self::with_coefficients(cfg, cfg.effective_coefficients()?)
    }

    pub fn with_coefficients(cfg: &SimConfig, coefficients: CoefficientSet) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(SpdeError::config("time.dt must be positive"));
        }
        Ok(Self {
            grid: cfg.grid,
            dt: cfg.dt,
            coefficients,
            gate: cfg.truncation,
            diffusion: ImplicitDiffusion::new(cfg.grid.n_interior(), cfg.dt, cfg.grid.dx()),
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coefficients
    }

    /// `κ_R(|u|²_H)`, or 1 without truncation.
    pub fn gate_value(&self, values: &[f64]) -> f64 {
        match self.gate {
            Some(g) => g.value(h_norm_sq(values, self.grid.dx())),
            None => 1.0,
        }
    }

    /// Explicit right-hand side before the implicit solve, written into `out`.
    pub(crate) fn explicit_rhs(&self, t: f64, u: &[f64], dw: &[f64], gate_value: f64, forcing: Option<&[f64]>, out: &mut [f64]) {
        let c = &self.coefficients;
        let dt = self.dt;
        let dx = self.grid.dx();
        let has_b = !c.b.is_zero();
        let has_g = c.has_flux();
        let has_sigma = !c.sigma.is_zero();
        let mut g_prev = if has_g { gate_value * c.g(t, 0.0, 0.0) } else { 0.0 };
        for i in 0..u.len() {
            let x = self.grid.x(i);
            let ui = u[i];
            let mut r = ui;
            if has_b {
                r += dt * gate_value * c.b.eval(t, x, ui);
            }
            if has_g {
                let gi = gate_value * c.g(t, x, ui);
                r += dt * (gi - g_prev) / dx;
                g_prev = gi;
            }
            if has_sigma {
                r += c.sigma.eval(t, x, ui) * dw[i] / dx;
            }
            if let Some(f) = forcing {
                r += dt * f[i];
            }
            out[i] = r;
        }
    }

    /// `dt (κ b(u) + D⁻(κ g(u)))`, the deterministic explicit part without `u` itself.
    pub(crate) fn drift_terms(&self, t: f64, u: &[f64], gate_value: f64, out: &mut [f64]) {
        let c = &self.coefficients;
        let dt = self.dt;
        let dx = self.grid.dx();
        let has_b = !c.b.is_zero();
        let has_g = c.has_flux();
        let mut g_prev = if has_g { gate_value * c.g(t, 0.0, 0.0) } else { 0.0 };
        for i in 0..u.len() {
            let x = self.grid.x(i);
            let mut r = 0.0;
            if has_b {
                r += dt * gate_value * c.b.eval(t, x, u[i]);
            }
            if has_g {
                let gi = gate_value * c.g(t, x, u[i]);
                r += dt * (gi - g_prev) / dx;
                g_prev = gi;
            }
            out[i] = r;
        }
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        self.diffusion.solve(rhs);
    }

    /// One step from `state` with panel `dw`; returns the state at `t + dt`.
    pub fn advance(&self, state: &Field, dw: &[f64], gate_value: f64, forcing: Option<&[f64]>) -> Result<Field> {
        let mut next = vec![0.0; state.values.len()];
        self.explicit_rhs(state.t, &state.values, dw, gate_value, forcing, &mut next);
        self.diffusion.solve(&mut next);
        let out = Field::from_values(self.grid, state.t + self.dt, next);
        if !out.is_finite() {
            return Err(SpdeError::BlowUp {
                t: out.t,
                last: Box::new(state.clone()),
            });
        }
        Ok(out)
    }
}

/// One solver step as a free function (builds the stepper on each call).
pub fn step(state: &Field, cfg: &SimConfig, noise: &NoiseIncrement, gate_value: f64) -> Result<Field> {
    if noise.grid != state.grid || noise.dt != cfg.dt {
        return Err(SpdeError::ReplayMismatch(
            "noise panel does not match the state grid or time step".into(),
        ));
    }
    Stepper::new(cfg)?.advance(state, &noise.dw, gate_value, None)
}

/// A single path advanced step by step, keeping the last noise panel.
#[derive(Debug, Clone)]
pub struct PathRunner {
    pub stepper: Stepper,
    pub state: Field,
    pub rng: RngStream,
    /// panel used by the most recent step
    pub panel: Vec<f64>,
    /// gate value used by the most recent step
    pub last_gate: f64,
    step_index: u64,
    t0: f64,
    scratch: Vec<f64>,
}

impl PathRunner {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        Self::with_stepper(cfg, Stepper::new(cfg)?)
    }

    pub fn with_stepper(cfg: &SimConfig, stepper: Stepper) -> Result<Self> {
        let n = cfg.grid.n_interior();
        Ok(Self {
            stepper,
            state: cfg.initial.clone(),
            rng: RngStream::new(cfg.seed, cfg.stream_id),
            panel: vec![0.0; n],
            last_gate: 1.0,
            step_index: 0,
            t0: cfg.initial.t,
            scratch: vec![0.0; n],
        })
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn advance(&mut self, forcing: Option<&[f64]>) -> Result<()> {
        let s = &self.stepper;
        fill_panel(&mut self.panel, s.grid, s.dt, &self.rng, self.step_index);
        let gate = s.gate_value(&self.state.values);
        self.last_gate = gate;
        s.explicit_rhs(self.state.t, &self.state.values, &self.panel, gate, forcing, &mut self.scratch);
        s.solve_in_place(&mut self.scratch);
        if self.scratch.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::BlowUp {
                t: self.state.t + s.dt,
                last: Box::new(self.state.clone()),
            });
        }
        std::mem::swap(&mut self.state.values, &mut self.scratch);
        self.step_index += 1;
        self.state.t = self.t0 + self.step_index as f64 * s.dt;
        Ok(())
    }
}
