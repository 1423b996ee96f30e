//! Tangent process along a direction `h` and the Bismut–Elworthy–Li
//! estimator of `⟨∇P_t ψ(f), h⟩`, with finite-difference references.

use rayon::prelude::*;

use crate::error::{Hypothesis, Result, SpdeError};
use crate::ergolab::Observable;
use crate::grid_noise::{NoiseIncrement, SpatialGrid};
use crate::solver::{h_norm_sq, Field, PathRunner, SimConfig, Stepper};
use crate::stats;

/// Mollification index used for tangent runs when the config has none.
pub const DEFAULT_TANGENT_MOLLIFICATION: usize = 64;

/// Derivative of the state with respect to the initial datum along `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    pub y: Vec<f64>,
    pub t: f64,
    pub grid: SpatialGrid,
}

impl TangentField {
    /// `Y(0) = h`.
    pub fn from_direction(h: &Field) -> Self {
        Self {
            y: h.values.clone(),
            t: h.t,
            grid: h.grid,
        }
    }

    pub fn as_field(&self) -> Field {
        Field::from_values(self.grid, self.t, self.y.clone())
    }

    pub fn h_norm(&self) -> f64 {
        h_norm_sq(&self.y, self.grid.dx()).sqrt()
    }
}

/// Exact linearization of the solver step, written into `out` before the
/// implicit solve.
fn tangent_rhs(stepper: &Stepper, t: f64, u: &[f64], y: &[f64], dw: &[f64], out: &mut [f64]) {
    let c = stepper.coefficients();
    let grid = stepper.grid();
    let dt = stepper.dt();
    let dx = grid.dx();
    let (kappa, dkappa) = match stepper.gate {
        Some(g) => {
            let e = h_norm_sq(u, dx);
            (g.value(e), g.derivative(e))
        }
        None => (1.0, 0.0),
    };
    // directional derivative of κ(|u|²_H): κ' · 2(u, Y)_H
    let kp = if dkappa == 0.0 {
        0.0
    } else {
        dkappa * 2.0 * dx * u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    };
    let has_b = !c.b.is_zero();
    let has_g = c.has_flux();
    let has_sigma = !c.sigma.is_zero();
    let mut flux_prev = if has_g { kp * c.g(t, 0.0, 0.0) } else { 0.0 };
    for i in 0..u.len() {
        let x = grid.x(i);
        let mut r = y[i];
        if has_b {
            let (bv, bd) = c.b.eval_with_deriv(t, x, u[i]);
            r += dt * (kappa * bd * y[i] + kp * bv);
        }
        if has_g {
            let (gv, gd) = c.g_with_deriv(t, x, u[i]);
            let flux = kappa * gd * y[i] + kp * gv;
            r += dt * (flux - flux_prev) / dx;
            flux_prev = flux;
        }
        if has_sigma {
            r += c.sigma.deriv(t, x, u[i]) * y[i] * dw[i] / dx;
        }
        out[i] = r;
    }
}

fn advance_tangent(stepper: &Stepper, base: &Field, y: &mut Vec<f64>, dw: &[f64], scratch: &mut Vec<f64>) -> Result<()> {
    tangent_rhs(stepper, base.t, &base.values, y, dw, scratch);
    stepper.solve_in_place(scratch);
    if scratch.iter().any(|v| !v.is_finite()) {
        return Err(SpdeError::TangentBlowUp { t: base.t + stepper.dt() });
    }
    std::mem::swap(y, scratch);
    Ok(())
}

/// Advances `Y` by one step of the linearized scheme around `base`, with the
/// same noise panel the base step uses.
pub fn tangent_step(y: &TangentField, base: &Field, cfg: &SimConfig, noise: &NoiseIncrement) -> Result<TangentField> {
    if noise.grid != base.grid || noise.dt != cfg.dt || y.grid != base.grid {
        return Err(SpdeError::ReplayMismatch("tangent, base state and noise disagree on grid or dt".into()));
    }
    let stepper = Stepper::new(cfg)?;
    let mut values = y.y.clone();
    let mut scratch = vec![0.0; values.len()];
    advance_tangent(&stepper, base, &mut values, &noise.dw, &mut scratch)?;
    Ok(TangentField {
        y: values,
        t: y.t + cfg.dt,
        grid: y.grid,
    })
}

fn steps_to(t: f64, dt: f64) -> Result<u64> {
    if !(t > 0.0) {
        return Err(SpdeError::domain(format!("t must be positive (got {t})")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t {
        return Err(SpdeError::domain(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    Ok(n as u64)
}

fn tangent_config(cfg: &SimConfig) -> SimConfig {
    let mut c = cfg.clone();
    c.mollification = Some(cfg.mollification.unwrap_or(DEFAULT_TANGENT_MOLLIFICATION));
    c.drift_hook = None;
    c
}

/// Runs the base path from `cfg.initial` to `t` together with the tangents
/// along every direction in `hs`, on the mollified coefficients.
pub fn propagate_tangents(cfg: &SimConfig, hs: &[Field], t: f64) -> Result<(Field, Vec<TangentField>)> {
    let cfg = tangent_config(cfg);
    cfg.validate()?;
    let stepper = Stepper::new(&cfg)?;
    let n_steps = steps_to(t, cfg.dt)?;
    let out = run_sample(&cfg, &stepper, &cfg.initial, hs, n_steps, cfg.stream_id, None)?;
    let ys = out
        .tangents
        .into_iter()
        .map(|y| TangentField {
            y,
            t: out.terminal.t,
            grid: cfg.grid,
        })
        .collect();
    Ok((out.terminal, ys))
}

/// Centered difference `(u(t, f + εh) - u(t, f - εh)) / 2ε` on the same noise
/// path and the same mollified coefficients the tangent uses.
pub fn fd_tangent(cfg: &SimConfig, h: &Field, t: f64, eps: f64) -> Result<Field> {
    let cfg = tangent_config(cfg);
    cfg.validate()?;
    let stepper = Stepper::new(&cfg)?;
    let n_steps = steps_to(t, cfg.dt)?;
    let plus = terminal_state(&cfg, &stepper, &cfg.initial.axpy(eps, h), n_steps, cfg.stream_id)?;
    let minus = terminal_state(&cfg, &stepper, &cfg.initial.axpy(-eps, h), n_steps, cfg.stream_id)?;
    Ok(plus.axpy(-1.0, &minus).scaled(0.5 / eps))
}

struct SampleOutput {
    terminal: Field,
    tangents: Vec<Vec<f64>>,
    /// `Σ_steps Σ_i Y_i / σ(u_i) dW_i`, one per direction
    weights: Vec<f64>,
}

fn terminal_state(cfg: &SimConfig, stepper: &Stepper, f: &Field, n_steps: u64, stream: u64) -> Result<Field> {
    let mut c = cfg.clone();
    c.initial = f.clone();
    c.stream_id = stream;
    let mut runner = PathRunner::with_stepper(&c, stepper.clone())?;
    for _ in 0..n_steps {
        runner.advance(None)?;
    }
    Ok(runner.state)
}

/// One Monte Carlo unit: base path, tangents and (if `k1` is given) the
/// martingale weights.
fn run_sample(cfg: &SimConfig, stepper: &Stepper, f: &Field, hs: &[Field], n_steps: u64, stream: u64, k1: Option<f64>) -> Result<SampleOutput> {
    let mut c = cfg.clone();
    c.initial = f.clone();
    c.stream_id = stream;
    let grid = cfg.grid;
    let mut runner = PathRunner::with_stepper(&c, stepper.clone())?;
    let mut ys: Vec<Vec<f64>> = hs.iter().map(|h| h.values.clone()).collect();
    let mut weights = vec![0.0; hs.len()];
    let mut scratch = vec![0.0; grid.n_interior()];
    let mut inv_sigma = vec![0.0; grid.n_interior()];
    let coefs = stepper.coefficients();
    for _ in 0..n_steps {
        let base = runner.state.clone();
        runner.advance(None)?;
        let dw = &runner.panel;
        if let Some(k1) = k1 {
            for i in 0..grid.n_interior() {
                let x = grid.x(i);
                let s = coefs.sigma.eval(base.t, x, base.values[i]);
                if !(s.abs() >= 0.5 * k1) {
                    return Err(SpdeError::Hypothesis {
                        hypothesis: Hypothesis::H4,
                        t: base.t,
                        x,
                        r: base.values[i],
                        detail: format!("|σ_n| = {} fell below k1/2 = {}", s.abs(), 0.5 * k1),
                    });
                }
                inv_sigma[i] = 1.0 / s;
            }
            for (w, y) in weights.iter_mut().zip(&ys) {
                *w += y.iter().zip(&inv_sigma).zip(dw).map(|((a, b), d)| a * b * d).sum::<f64>();
            }
        }
        for y in ys.iter_mut() {
            advance_tangent(stepper, &base, y, dw, &mut scratch)?;
        }
    }
    Ok(SampleOutput {
        terminal: runner.state,
        tangents: ys,
        weights,
    })
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BELEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

impl BELEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        Self {
            value: stats::mean(xs),
            std_err: stats::std_err(xs),
            n_samples: xs.len(),
        }
    }

    /// `|a - b| / sqrt(se_a² + se_b²)`
    pub fn z_score(&self, other: &BELEstimate) -> f64 {
        (self.value - other.value).abs() / self.std_err.hypot(other.std_err)
    }
}

fn required_k1(cfg: &SimConfig) -> Result<f64> {
    match cfg.coefficients.constants.sigma_lower {
        Some(k1) if k1 > 0.0 => Ok(k1),
        _ => Err(SpdeError::config("(H4) required for BEL estimator")),
    }
}

/// `⟨∇P_t ψ(f), h⟩` for several directions on shared paths.
///
/// Sample `j` runs on stream `cfg.stream_id + j`.
pub fn bel_gradients(psi: &Observable, f: &Field, hs: &[Field], t: f64, cfg: &SimConfig, n_samples: usize) -> Result<Vec<BELEstimate>> {
    let k1 = required_k1(cfg)?;
    let cfg = tangent_config(cfg);
    cfg.validate()?;
    let stepper = Stepper::new(&cfg)?;
    let n_steps = steps_to(t, cfg.dt)?;
    let per_sample: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| {
            let out = run_sample(&cfg, &stepper, f, hs, n_steps, cfg.stream_id.wrapping_add(j), Some(k1))?;
            let p = psi.eval(&out.terminal);
            Ok(out.weights.iter().map(|m| p * m / t).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..hs.len())
        .map(|d| {
            let xs: Vec<f64> = per_sample.iter().map(|v| v[d]).collect();
            BELEstimate::from_samples(&xs)
        })
        .collect())
}

pub fn bel_gradient(psi: &Observable, f: &Field, h: &Field, t: f64, cfg: &SimConfig, n_samples: usize) -> Result<BELEstimate> {
    Ok(bel_gradients(psi, f, std::slice::from_ref(h), t, cfg, n_samples)?[0])
}

/// `P̂_t ψ(f)` on streams `stream_base + j`.
pub fn semigroup_estimate(psi: &Observable, f: &Field, t: f64, cfg: &SimConfig, n_samples: usize, stream_base: u64) -> Result<BELEstimate> {
    cfg.validate()?;
    let stepper = Stepper::new(cfg)?;
    let n_steps = steps_to(t, cfg.dt)?;
    let xs: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| terminal_state(cfg, &stepper, f, n_steps, stream_base.wrapping_add(j)).map(|u| psi.eval(&u)))
        .collect::<Result<_>>()?;
    Ok(BELEstimate::from_samples(&xs))
}

/// Centered finite difference of `P̂_t ψ` in `f` along `h`, with common random
/// numbers for the two initial conditions; same streams and coefficients as
/// [`bel_gradient`].
pub fn fd_gradient(psi: &Observable, f: &Field, h: &Field, t: f64, cfg: &SimConfig, n_samples: usize, eps: f64) -> Result<BELEstimate> {
    let cfg = tangent_config(cfg);
    cfg.validate()?;
    let stepper = Stepper::new(&cfg)?;
    let n_steps = steps_to(t, cfg.dt)?;
    let fp = f.axpy(eps, h);
    let fm = f.axpy(-eps, h);
    let xs: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| {
            let s = cfg.stream_id.wrapping_add(j);
            let up = terminal_state(&cfg, &stepper, &fp, n_steps, s)?;
            let um = terminal_state(&cfg, &stepper, &fm, n_steps, s)?;
            Ok((psi.eval(&up) - psi.eval(&um)) / (2.0 * eps))
        })
        .collect::<Result<_>>()?;
    Ok(BELEstimate::from_samples(&xs))
}

/// Sup over directions of the estimated gradient at each time, and the
/// log-log fit `sup_h |⟨∇P_t ψ, h⟩| ≈ C t^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoundFit {
    pub times: Vec<f64>,
    pub sup_gradient: Vec<f64>,
    pub exponent: f64,
    /// `max_t sup_h |∇P_t ψ| √t / ‖ψ‖_∞`
    pub constant: f64,
}

/// Directions are normalized to unit H-norm before use.
pub fn fit_gradient_bound(psi: &Observable, f: &Field, directions: &[Field], times: &[f64], cfg: &SimConfig, n_samples: usize) -> Result<GradientBoundFit> {
    let unit: Vec<Field> = directions.iter().map(|h| h.scaled(1.0 / h.h_norm())).collect();
    let psi_sup = psi.sup_bound.unwrap_or(1.0);
    let mut sup_gradient = Vec::with_capacity(times.len());
    for &t in times {
        let est = bel_gradients(psi, f, &unit, t, cfg, n_samples)?;
        sup_gradient.push(est.iter().fold(0.0f64, |m, e| m.max(e.value.abs())));
    }
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = sup_gradient.iter().map(|g| g.ln()).collect();
    let constant = times
        .iter()
        .zip(&sup_gradient)
        .fold(0.0f64, |m, (t, g)| m.max(g * t.sqrt() / psi_sup));
    Ok(GradientBoundFit {
        times: times.to_vec(),
        exponent: stats::ols_slope(&lx, &ly),
        sup_gradient,
        constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerProbe {
    pub difference: f64,
    /// combined standard error of the difference
    pub std_err: f64,
    /// `C / √t · ‖ψ‖_∞ · |f1 - f2|_H`
    pub bound: f64,
}

/// Compares `P̂_t ψ(f1)` and `P̂_t ψ(f2)` on independent noise against the
/// gradient bound with constant `constant` (for instance from
/// [`fit_gradient_bound`]).
pub fn strong_feller_probe(psi: &Observable, f1: &Field, f2: &Field, t: f64, cfg: &SimConfig, n_samples: usize, constant: f64) -> Result<FellerProbe> {
    let psi_sup = psi
        .sup_bound
        .ok_or_else(|| SpdeError::config("strong Feller probe needs a bounded observable"))?;
    let a = semigroup_estimate(psi, f1, t, cfg, n_samples, cfg.stream_id)?;
    let b = semigroup_estimate(psi, f2, t, cfg, n_samples, cfg.stream_id.wrapping_add(1 << 31))?;
    Ok(FellerProbe {
        difference: (a.value - b.value).abs(),
        std_err: a.std_err.hypot(b.std_err),
        bound: constant / t.sqrt() * psi_sup * f1.distance(f2),
    })
}

/// `P̂_t ψ(f) - P̂^R_t ψ(f)` for each level, using common random numbers so
/// paths that never reach `R` contribute exactly zero.
pub fn truncation_gap(psi: &Observable, f: &Field, t: f64, cfg: &SimConfig, levels: &[f64], n_samples: usize) -> Result<Vec<BELEstimate>> {
    let full = cfg.clone().without_truncation();
    full.validate()?;
    let n_steps = steps_to(t, cfg.dt)?;
    let full_stepper = Stepper::new(&full)?;
    let reference: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|j| terminal_state(&full, &full_stepper, f, n_steps, cfg.stream_id.wrapping_add(j)).map(|u| psi.eval(&u)))
        .collect::<Result<_>>()?;
    levels
        .iter()
        .map(|&level| {
            let truncated = cfg.clone().with_truncation(level);
            let stepper = Stepper::new(&truncated)?;
            let gaps: Vec<f64> = (0..n_samples as u64)
                .into_par_iter()
                .map(|j| {
                    terminal_state(&truncated, &stepper, f, n_steps, cfg.stream_id.wrapping_add(j))
                        .map(|u| reference[j as usize] - psi.eval(&u))
                })
                .collect::<Result<_>>()?;
            Ok(BELEstimate::from_samples(&gaps))
        })
        .collect()
}
