use rayon::prelude::*;

use crate::coefficients::{CoefficientSet, ScalarCoef};
use crate::error::{Result, SpdeError};
use crate::grid_noise::role_stream;
use crate::heat_kernel::{eigenvalue, GreenKernel, SineBasis};
use crate::solver::{h_norm_sq, Field, PathRunner, SimConfig, Stepper};
use crate::stats;

const ROLE_STEER: u32 = 1;
const ROLE_PILOT: u32 = 2;
const ROLE_REACH: u32 = 3;

/// Target, radius, times and threshold for one steering experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPlan {
    pub a_target: Field,
    /// spectrally smoothed target, `|a - ã|_H < r/6`
    pub a_tilde: Field,
    /// `A ã`, computed mode by mode
    pub a_tilde_laplacian: Vec<f64>,
    /// number of sine modes kept in `ã`
    pub cutoff: usize,
    pub r: f64,
    pub t: f64,
    pub t1: f64,
    pub k_threshold: f64,
    /// keep `b` in the steered system (off by default)
    pub with_reaction: bool,
}

impl SteeringPlan {
    pub fn new(a: Field, r: f64, t: f64, t1: f64, k_threshold: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(SpdeError::domain(format!("radius must be positive (got {r})")));
        }
        if !(0.0 < t1 && t1 < t) {
            return Err(SpdeError::domain(format!("need 0 < t1 < t (got t1 = {t1}, t = {t})")));
        }
        if !(k_threshold > 0.0) {
            return Err(SpdeError::domain(format!("K must be positive (got {k_threshold})")));
        }
        let grid = a.grid;
        let full = GreenKernel::new(grid.n_cells() - 1)?;
        let basis = SineBasis::new(grid, &full)?;
        let coeffs = basis.project(&a.values);
        let mut cutoff = (grid.n_cells() / 4).max(1);
        loop {
            let kept: Vec<f64> = coeffs.iter().enumerate().map(|(n, c)| if n < cutoff { *c } else { 0.0 }).collect();
            let a_tilde = Field::from_values(grid, a.t, basis.synthesize(&kept));
            if a.distance(&a_tilde) < r / 6.0 {
                let lap: Vec<f64> = kept.iter().enumerate().map(|(n, c)| -eigenvalue(n + 1) * c).collect();
                let a_tilde_laplacian = basis.synthesize(&lap);
                if a_tilde_laplacian.iter().any(|v| !v.is_finite()) {
                    return Err(SpdeError::domain("A ã is not finite"));
                }
                return Ok(Self {
                    a_target: a,
                    a_tilde,
                    a_tilde_laplacian,
                    cutoff,
                    r,
                    t,
                    t1,
                    k_threshold,
                    with_reaction: false,
                });
            }
            if cutoff >= coeffs.len() {
                return Err(SpdeError::domain(format!(
                    "no spectral truncation of a is within r/6 = {} of a",
                    r / 6.0
                )));
            }
            cutoff = (2 * cutoff).min(coeffs.len());
        }
    }

    /// Plan with `K = 2 sqrt(E|Z(t1)|²_H)` estimated from `n_pilot` free paths.
    pub fn with_pilot(a: Field, r: f64, t: f64, t1: f64, cfg: &SimConfig, n_pilot: usize) -> Result<Self> {
        let k = pilot_threshold(cfg, t1, n_pilot, false)?;
        Self::new(a, r, t, t1, k)
    }

    pub fn with_reaction(mut self, on: bool) -> Self {
        self.with_reaction = on;
        self
    }
}

fn steps_to(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

/// Coefficients of the steered system: `b` dropped unless requested.
fn steered_coefficients(cfg: &SimConfig, with_reaction: bool) -> Result<CoefficientSet> {
    let mut c = cfg.effective_coefficients()?;
    if !with_reaction {
        c.b = ScalarCoef::Zero;
    }
    Ok(c)
}

/// `2 sqrt(mean |Z(t1)|²_H)` over free paths on the pilot streams.
pub fn pilot_threshold(cfg: &SimConfig, t1: f64, n_pilot: usize, with_reaction: bool) -> Result<f64> {
    let stepper = Stepper::with_coefficients(cfg, steered_coefficients(cfg, with_reaction)?)?;
    let n1 = steps_to(t1, cfg.dt);
    let energies: Vec<f64> = (0..n_pilot as u32)
        .into_par_iter()
        .map(|j| {
            let c = cfg.clone().with_stream(cfg.stream_id.wrapping_add(role_stream(ROLE_PILOT, j)));
            let mut runner = PathRunner::with_stepper(&c, stepper.clone())?;
            for _ in 0..n1 {
                runner.advance(None)?;
            }
            Ok(runner.state.h_norm_sq())
        })
        .collect::<Result<_>>()?;
    let k = 2.0 * stats::mean(&energies).sqrt();
    // a noiseless pilot from zero gives K = 0; any positive level works there
    Ok(if k > 0.0 { k } else { f64::MIN_POSITIVE.sqrt() })
}

/// Control drift frozen at `ξ = Z(t1)`, evaluated spectrally.
struct Controller<'a> {
    plan: &'a SteeringPlan,
    basis: SineBasis,
    /// `⟨ã - ξ, e_n⟩`
    coeffs: Vec<f64>,
    factor: f64,
}

impl<'a> Controller<'a> {
    fn new(plan: &'a SteeringPlan, basis: SineBasis, xi: &Field) -> Self {
        let diff: Vec<f64> = plan.a_tilde.values.iter().zip(&xi.values).map(|(a, x)| a - x).collect();
        let norm = xi.h_norm();
        let k = plan.k_threshold;
        let factor = if norm <= k {
            1.0
        } else if norm >= 2.0 * k {
            0.0
        } else {
            (2.0 * k - norm) / k
        };
        Self {
            plan,
            coeffs: basis.project(&diff),
            basis,
            factor,
        }
    }

    fn drift(&self, s: f64) -> Vec<f64> {
        let grid = self.basis.grid();
        if self.factor == 0.0 {
            return vec![0.0; grid.n_interior()];
        }
        let p = self.plan;
        let tau = s - p.t1;
        let span = p.t - p.t1;
        let c: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, d)| d * (-eigenvalue(n + 1) * tau).exp() / span)
            .collect();
        let mut out = self.basis.synthesize(&c);
        for (o, l) in out.iter_mut().zip(&p.a_tilde_laplacian) {
            *o = self.factor * (*o - l);
        }
        out
    }
}

/// `(1/(t - t1)) G_{s-t1}(ã - ξ) - A ã` when `|ξ|_H ≤ K`, zero when
/// `|ξ|_H ≥ 2K`, and the linear blend `(2K - |ξ|_H)/K` of the two in between.
pub fn control_drift(xi: &Field, s: f64, plan: &SteeringPlan, kernel: &GreenKernel) -> Result<Field> {
    if s < plan.t1 {
        return Err(SpdeError::domain(format!("control drift needs s ≥ t1 = {} (got {s})", plan.t1)));
    }
    if s > plan.t * (1.0 + 1e-12) {
        return Err(SpdeError::domain(format!("control drift needs s ≤ t = {} (got {s})", plan.t)));
    }
    let basis = SineBasis::new(xi.grid, kernel)?;
    let ctl = Controller::new(plan, basis, xi);
    Ok(Field::from_values(xi.grid, s, ctl.drift(s)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringResult {
    pub n_paths: usize,
    pub hits: usize,
    /// fraction of paths with `|Z(t) - a|_H < r/2`
    pub hit_fraction: f64,
    /// one-sided 95% Clopper–Pearson lower bound on the hit probability
    pub hit_lower_95: f64,
    pub final_distances: Vec<f64>,
    pub k_threshold: f64,
    /// fraction of paths with `|Z(t1)|_H ≤ K`
    pub regime_fraction: f64,
    /// `|I1(t) - ã|_H` per path
    pub i1_errors: Vec<f64>,
    pub i2_norms: Vec<f64>,
    pub i3_norms: Vec<f64>,
    /// fraction with `|I2(t)|_H ≥ r/6`
    pub i2_exceed_fraction: f64,
    /// fraction with `|I3(t)|_H ≥ r/6`
    pub i3_exceed_fraction: f64,
}

impl SteeringResult {
    /// Hit fraction for the ball of radius `radius/2` on the same paths.
    pub fn hit_fraction_at(&self, radius: f64) -> f64 {
        self.final_distances.iter().filter(|d| **d < radius / 2.0).count() as f64 / self.n_paths as f64
    }

    /// Whether the measured events satisfy `3/4`, `1/8`, `1/8`.
    pub fn event_chain_holds(&self) -> bool {
        self.regime_fraction >= 0.75 && self.i2_exceed_fraction <= 0.125 && self.i3_exceed_fraction <= 0.125
    }
}

struct PathRecord {
    distance: f64,
    in_regime: bool,
    i1_error: f64,
    i2: f64,
    i3: f64,
}

/// Free dynamics on `[0, t1]`, then the control drift on `(t1, t]`.
///
/// On the controlled phase `Z = I1 + I2 + I3` is split by linearity of the
/// implicit step: `I1` carries `ξ` and the control, `I2` the flux (and `b`
/// when enabled), `I3` the noise.
pub fn steering_experiment(plan: &SteeringPlan, cfg: &SimConfig, n_paths: usize) -> Result<SteeringResult> {
    if cfg.truncation.is_none() {
        return Err(SpdeError::config("steering needs truncation.R"));
    }
    cfg.validate()?;
    if plan.a_target.grid != cfg.grid {
        return Err(SpdeError::config("steering target lives on a different grid"));
    }
    let stepper = Stepper::with_coefficients(cfg, steered_coefficients(cfg, plan.with_reaction)?)?;
    let kernel = GreenKernel::for_grid(&cfg.grid);
    let basis = SineBasis::new(cfg.grid, &kernel)?;
    let n1 = steps_to(plan.t1, cfg.dt);
    let n_total = steps_to(plan.t, cfg.dt);
    let grid = cfg.grid;
    let dx = grid.dx();
    let n = grid.n_interior();

    let records: Vec<PathRecord> = (0..n_paths as u32)
        .into_par_iter()
        .map(|j| {
            let c = cfg.clone().with_stream(cfg.stream_id.wrapping_add(role_stream(ROLE_STEER, j)));
            let mut runner = PathRunner::with_stepper(&c, stepper.clone())?;
            for _ in 0..n1 {
                runner.advance(None)?;
            }
            let xi = runner.state.clone();
            let ctl = Controller::new(plan, basis.clone(), &xi);
            let mut i1 = xi.values.clone();
            let mut i2 = vec![0.0; n];
            let mut i3 = vec![0.0; n];
            let mut drift = vec![0.0; n];
            for k in n1..n_total {
                let z = runner.state.clone();
                let s_next = cfg.initial.t + (k + 1) as f64 * cfg.dt;
                let f = ctl.drift(s_next);
                runner.advance(Some(&f))?;
                let gate = runner.last_gate;
                for (a, fi) in i1.iter_mut().zip(&f) {
                    *a += cfg.dt * fi;
                }
                stepper.solve_in_place(&mut i1);
                stepper.drift_terms(z.t, &z.values, gate, &mut drift);
                for (a, d) in i2.iter_mut().zip(&drift) {
                    *a += d;
                }
                stepper.solve_in_place(&mut i2);
                let sig = &stepper.coefficients().sigma;
                for i in 0..n {
                    i3[i] += sig.eval(z.t, grid.x(i), z.values[i]) * runner.panel[i] / dx;
                }
                stepper.solve_in_place(&mut i3);
            }
            let i1_err: Vec<f64> = i1.iter().zip(&plan.a_tilde.values).map(|(a, b)| a - b).collect();
            Ok(PathRecord {
                distance: runner.state.distance(&plan.a_target),
                in_regime: xi.h_norm() <= plan.k_threshold,
                i1_error: h_norm_sq(&i1_err, dx).sqrt(),
                i2: h_norm_sq(&i2, dx).sqrt(),
                i3: h_norm_sq(&i3, dx).sqrt(),
            })
        })
        .collect::<Result<_>>()?;

    let np = n_paths as f64;
    let hits = records.iter().filter(|p| p.distance < plan.r / 2.0).count();
    let frac = |pred: &dyn Fn(&PathRecord) -> bool| records.iter().filter(|p| pred(p)).count() as f64 / np;
    Ok(SteeringResult {
        n_paths,
        hits,
        hit_fraction: hits as f64 / np,
        hit_lower_95: stats::binomial_lower(hits, n_paths, 0.05),
        k_threshold: plan.k_threshold,
        regime_fraction: frac(&|p| p.in_regime),
        i2_exceed_fraction: frac(&|p| p.i2 >= plan.r / 6.0),
        i3_exceed_fraction: frac(&|p| p.i3 >= plan.r / 6.0),
        final_distances: records.iter().map(|p| p.distance).collect(),
        i1_errors: records.iter().map(|p| p.i1_error).collect(),
        i2_norms: records.iter().map(|p| p.i2).collect(),
        i3_norms: records.iter().map(|p| p.i3).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachStatus {
    Positive,
    Inconclusive,
}

impl std::fmt::Display for ReachStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReachStatus::Positive => "positive",
            ReachStatus::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrreducibilityReport {
    pub status: ReachStatus,
    /// `LCB(P(u^R(t) ∈ B(a, r/2))) - UCB(P(sup |u - u^R|_H ≥ r/2))`
    pub lower_bound: f64,
    pub n_paths: usize,
    pub hits: usize,
    pub hit_lower: f64,
    pub gap_events: usize,
    pub gap_upper: f64,
}

/// Two-step lower bound for `P(u(t) ∈ B_H(a, r))`: the truncated path lands in
/// `B(a, r/2)`, and the untruncated path stays within `r/2` of it.
///
/// Both probabilities are estimated directly on shared noise; the two
/// one-sided bounds are at 97.5% each, so the difference holds at 95%. The
/// status is inconclusive when the truncation gap bound exceeds `1/4` or the
/// combined bound is not positive.
pub fn irreducibility_report(plan: &SteeringPlan, cfg_r: &SimConfig, cfg_full: &SimConfig, n_paths: usize) -> Result<IrreducibilityReport> {
    cfg_r.validate()?;
    cfg_full.validate()?;
    if cfg_r.grid != cfg_full.grid || cfg_r.dt != cfg_full.dt {
        return Err(SpdeError::config("truncated and full configurations must share grid and dt"));
    }
    let stepper_r = Stepper::new(cfg_r)?;
    let stepper_full = Stepper::new(cfg_full)?;
    let n_total = steps_to(plan.t, cfg_r.dt);
    let gap_level = plan.r / 2.0;

    let outcomes: Vec<(bool, bool)> = (0..n_paths as u32)
        .into_par_iter()
        .map(|j| {
            let stream = cfg_r.stream_id.wrapping_add(role_stream(ROLE_REACH, j));
            let mut ur = PathRunner::with_stepper(&cfg_r.clone().with_stream(stream), stepper_r.clone())?;
            let mut uf = PathRunner::with_stepper(
                &cfg_full.clone().with_initial(cfg_r.initial.clone()).with_stream(stream),
                stepper_full.clone(),
            )?;
            let mut gap = false;
            for _ in 0..n_total {
                ur.advance(None)?;
                if !gap {
                    match uf.advance(None) {
                        Ok(()) => gap = uf.state.distance(&ur.state) >= gap_level,
                        Err(SpdeError::BlowUp { .. }) => gap = true,
                        Err(e) => return Err(e),
                    }
                }
            }
            Ok((ur.state.distance(&plan.a_target) < gap_level, gap))
        })
        .collect::<Result<_>>()?;

    let hits = outcomes.iter().filter(|o| o.0).count();
    let gap_events = outcomes.iter().filter(|o| o.1).count();
    let hit_lower = stats::binomial_lower(hits, n_paths, 0.025);
    let gap_upper = stats::binomial_upper(gap_events, n_paths, 0.025);
    let lower_bound = hit_lower - gap_upper;
    let status = if gap_upper <= 0.25 && lower_bound > 0.0 {
        ReachStatus::Positive
    } else {
        ReachStatus::Inconclusive
    };
    Ok(IrreducibilityReport {
        status,
        lower_bound,
        n_paths,
        hits,
        hit_lower,
        gap_events,
        gap_upper,
    })
}
