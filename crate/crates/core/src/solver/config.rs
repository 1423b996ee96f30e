use std::fmt;
use std::sync::Arc;

use crate::coefficients::{mollify, CoefficientSet, TruncationGate};
use crate::error::{Result, SpdeError};
use crate::grid_noise::SpatialGrid;

use super::Field;

/// External forcing `(s, state) ↦ f(s, ·)` added to the drift; `None` means no forcing.
pub type DriftHook = Arc<dyn Fn(f64, &Field) -> Option<Vec<f64>> + Send + Sync>;

/// CFL constant for the explicit flux term of the Burgers preset.
pub const BURGERS_CFL: f64 = 0.25;

#[derive(Clone)]
pub struct SimConfig {
    pub grid: SpatialGrid,
    pub dt: f64,
    pub horizon: f64,
    pub coefficients: CoefficientSet,
    pub truncation: Option<TruncationGate>,
    pub mollification: Option<usize>,
    pub seed: u64,
    pub stream_id: u64,
    pub save_every: usize,
    pub initial: Field,
    pub drift_hook: Option<DriftHook>,
    /// levels `R` whose exit times `τ_R` are tracked step by step
    pub exit_levels: Vec<f64>,
    /// node position for the `point` observable
    pub observable_point: f64,
}

impl fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimConfig")
            .field("n_cells", &self.grid.n_cells())
            .field("dt", &self.dt)
            .field("horizon", &self.horizon)
            .field("coefficients", &self.coefficients.label)
            .field("truncation", &self.truncation)
            .field("mollification", &self.mollification)
            .field("seed", &self.seed)
            .field("stream_id", &self.stream_id)
            .field("save_every", &self.save_every)
            .field("drift_hook", &self.drift_hook.is_some())
            .finish()
    }
}

impl SimConfig {
    pub fn new(grid: SpatialGrid, dt: f64, horizon: f64, coefficients: CoefficientSet) -> Self {
        Self {
            grid,
            dt,
            horizon,
            coefficients,
            truncation: None,
            mollification: None,
            seed: 0,
            stream_id: 0,
            save_every: 1,
            initial: Field::zeros(grid, 0.0),
            drift_hook: None,
            exit_levels: Vec::new(),
            observable_point: 0.5,
        }
    }

    pub fn with_initial(mut self, f: Field) -> Self {
        self.initial = f;
        self
    }

    pub fn with_truncation(mut self, level: f64) -> Self {
        self.truncation = Some(TruncationGate { level });
        self
    }

    pub fn without_truncation(mut self) -> Self {
        self.truncation = None;
        self
    }

    pub fn with_mollification(mut self, n: usize) -> Self {
        self.mollification = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64, stream_id: u64) -> Self {
        self.seed = seed;
        self.stream_id = stream_id;
        self
    }

    pub fn with_stream(mut self, stream_id: u64) -> Self {
        self.stream_id = stream_id;
        self
    }

    pub fn with_save_every(mut self, k: usize) -> Self {
        self.save_every = k;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_exit_levels(mut self, levels: Vec<f64>) -> Self {
        self.exit_levels = levels;
        self
    }

    pub fn with_coefficients(mut self, c: CoefficientSet) -> Self {
        self.coefficients = c;
        self
    }

    pub fn n_steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Coefficients actually used by the stepper (mollified when requested).
    pub fn effective_coefficients(&self) -> Result<CoefficientSet> {
        match self.mollification {
            Some(n) => mollify(&self.coefficients, n),
            None => Ok(self.coefficients.clone()),
        }
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            errors.push("time.dt must be positive".to_string());
        }
        if !(self.horizon >= self.dt) {
            errors.push(format!("time.horizon ({}) must be at least time.dt ({})", self.horizon, self.dt));
        }
        if self.save_every == 0 {
            errors.push("time.save_every must be at least 1".to_string());
        }
        if self.initial.grid != self.grid {
            errors.push("initial condition lives on a different grid".to_string());
        }
        if let Some(g) = self.truncation {
            if !(g.level > 0.0) {
                errors.push("truncation.R must be positive".to_string());
            }
        }
        if self.mollification == Some(0) {
            errors.push("coefficients.mollify must be at least 1".to_string());
        }
        if !errors.is_empty() {
            return Err(SpdeError::Validation(errors));
        }
        if self.coefficients.has_flux() {
            let limit = BURGERS_CFL * self.grid.dx() * self.grid.dx();
            if self.dt > limit {
                // validate runs once per path; say it once per process
                static CFL_WARNED: std::sync::Once = std::sync::Once::new();
                CFL_WARNED.call_once(|| log::warn!(
                    "dt = {} exceeds the flux resolution guideline {BURGERS_CFL}·dx² = {limit}",
                    self.dt
                ));
            }
        }
        Ok(())
    }
}
