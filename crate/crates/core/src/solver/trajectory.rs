use crate::error::{Result, SpdeError};
use crate::grid_noise::SpatialGrid;
use crate::heat_kernel::{eigenfunction, StochasticConvolution};

use super::step::PathRunner;
use super::{Field, SimConfig};

/// Built-in observable time series aligned with the samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub h_norm_sq: Vec<f64>,
    pub mode_1: Vec<f64>,
    pub point: Vec<f64>,
    pub sup_abs: Vec<f64>,
}

impl ObservableSeries {
    pub const NAMES: [&'static str; 4] = ["h_norm_sq", "mode_1", "point", "sup_abs"];

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        match name {
            "h_norm_sq" => Some(&self.h_norm_sq),
            "mode_1" => Some(&self.mode_1),
            "point" => Some(&self.point),
            "sup_abs" => Some(&self.sup_abs),
            _ => None,
        }
    }

    fn push(&mut self, f: &Field, point_index: usize, e1: &[f64]) {
        self.h_norm_sq.push(f.h_norm_sq());
        self.mode_1
            .push(f.dx() * f.values.iter().zip(e1).map(|(a, b)| a * b).sum::<f64>());
        self.point.push(f.values[point_index]);
        self.sup_abs.push(f.sup_abs());
    }
}

/// Exit time of one level, `+∞` if never reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub level: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Field>,
    pub observables: ObservableSeries,
    /// exit times tracked at every step for the configured levels
    pub exit_times: Vec<ExitRecord>,
    pub seed: u64,
    pub stream_id: u64,
    pub dt: f64,
    pub save_every: usize,
    /// global step index of the first sample
    pub first_step: u64,
}

impl Trajectory {
    pub fn grid(&self) -> SpatialGrid {
        self.samples[0].grid
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> &Field {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn tau(&self, level: f64) -> Option<f64> {
        self.exit_times.iter().find(|e| e.level == level).map(|e| e.tau)
    }

    pub(crate) fn require_every_step(&self) -> Result<()> {
        if self.save_every != 1 {
            return Err(SpdeError::ReplayMismatch(format!(
                "trajectory was thinned (save_every = {}); replay needs every step",
                self.save_every
            )));
        }
        Ok(())
    }
}

/// Runs the configured path over `[0, T]`.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid;
    let point_index = grid.nearest_node(cfg.observable_point);
    let e1: Vec<f64> = grid.interior_nodes().map(|x| eigenfunction(1, x)).collect();
    let mut runner = PathRunner::new(cfg)?;
    let n_steps = cfg.n_steps();

    let mut samples = vec![cfg.initial.clone()];
    let mut obs = ObservableSeries::default();
    obs.push(&cfg.initial, point_index, &e1);

    let mut exit_times: Vec<ExitRecord> = cfg
        .exit_levels
        .iter()
        .map(|&level| ExitRecord { level, tau: f64::INFINITY })
        .collect();
    let check_exits = |exits: &mut [ExitRecord], f: &Field| {
        let e = f.h_norm_sq();
        for rec in exits.iter_mut() {
            if rec.tau.is_infinite() && e >= rec.level {
                rec.tau = f.t;
            }
        }
    };
    check_exits(&mut exit_times, &cfg.initial);

    for k in 1..=n_steps {
        let forcing = cfg.drift_hook.as_ref().and_then(|h| h(runner.state.t, &runner.state));
        runner.advance(forcing.as_deref())?;
        check_exits(&mut exit_times, &runner.state);
        if k % cfg.save_every as u64 == 0 || k == n_steps {
            obs.push(&runner.state, point_index, &e1);
            samples.push(runner.state.clone());
        }
    }

    Ok(Trajectory {
        samples,
        observables: obs,
        exit_times,
        seed: cfg.seed,
        stream_id: cfg.stream_id,
        dt: cfg.dt,
        save_every: cfg.save_every,
        first_step: 0,
    })
}

/// First sample time with `|u|²_H ≥ R`, or `+∞`.
pub fn exit_time(traj: &Trajectory, level: f64) -> f64 {
    traj.observables
        .h_norm_sq
        .iter()
        .zip(&traj.samples)
        .find(|(e, _)| **e >= level)
        .map_or(f64::INFINITY, |(_, f)| f.t)
}

/// `|u|²_H`, `|v|²_H` with `v = u - η`, and the running sup of `η`.
#[derive(Debug, Clone)]
pub struct EnergyRecord {
    pub u_sq: Vec<f64>,
    pub v_sq: Vec<f64>,
    pub eta_star: Vec<f64>,
}

pub fn energy_record(traj: &Trajectory, eta: &StochasticConvolution) -> Result<EnergyRecord> {
    if eta.eta.len() != traj.samples.len() {
        return Err(SpdeError::ReplayMismatch("η and trajectory have different sample counts".into()));
    }
    let u_sq = traj.samples.iter().map(Field::h_norm_sq).collect();
    let v_sq = traj
        .samples
        .iter()
        .zip(&eta.eta)
        .map(|(u, e)| u.distance(e).powi(2))
        .collect();
    Ok(EnergyRecord {
        u_sq,
        v_sq,
        eta_star: eta.eta_star.clone(),
    })
}
