//! Dirichlet heat kernel on `[0, 1]` and the convolution operators built from it.
//!
//! Everything is expressed in the sine basis `e_n(x) = √2 sin(nπx)`,
//! `λ_n = n²π²`, truncated at `n_modes`. On a grid with `n_cells` cells the
//! discrete sine vectors are exactly orthonormal in `dx Σ_i` for
//! `n < n_cells`, which is what makes the spectral projections below exact.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Result, SpdeError};
use crate::grid_noise::{fill_panel, RngStream, SpatialGrid};
use crate::solver::{Field, Trajectory};
use crate::coefficients::ScalarCoef;

/// `e_n(x) = √2 sin(nπx)`.
#[inline]
pub fn eigenfunction(n: usize, x: f64) -> f64 {
    SQRT_2 * (n as f64 * PI * x).sin()
}

/// `λ_n = n²π²`.
#[inline]
pub fn eigenvalue(n: usize) -> f64 {
    let k = n as f64 * PI;
    k * k
}

/// Truncated eigen-expansion of the Dirichlet heat kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreenKernel {
    pub n_modes: usize,
}

/// Which kernel `H(s, t; x, y)` the convolution operator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `G_{t-s}(x, y)`
    Gauss,
    /// `∂_y G_{t-s}(x, y)`
    GaussDy,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SpdeError::domain(format!(
            "heat kernel evaluated at t = {t}; the expansion is singular at t <= 0"
        )))
    }
}

impl GreenKernel {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(SpdeError::config("kernel needs at least one mode"));
        }
        Ok(Self { n_modes })
    }

    /// Default truncation for a grid: `n_cells / 2` modes.
    pub fn for_grid(grid: &SpatialGrid) -> Self {
        Self {
            n_modes: grid.n_cells() / 2,
        }
    }

    pub fn eval_green(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        Ok((1..=self.n_modes)
            .map(|n| 2.0 * (n as f64 * PI * x).sin() * (n as f64 * PI * y).sin() * (-eigenvalue(n) * t).exp())
            .sum())
    }

    pub fn eval_green_dy(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        Ok((1..=self.n_modes)
            .map(|n| {
                let k = n as f64 * PI;
                2.0 * k * (k * x).sin() * (k * y).cos() * (-eigenvalue(n) * t).exp()
            })
            .sum())
    }

    /// `A G_t(x, y)` evaluated term by term, i.e. `Σ -λ_n (mode term)`.
    pub fn eval_green_dt(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        check_time(t)?;
        Ok((1..=self.n_modes)
            .map(|n| {
                -eigenvalue(n)
                    * 2.0
                    * (n as f64 * PI * x).sin()
                    * (n as f64 * PI * y).sin()
                    * (-eigenvalue(n) * t).exp()
            })
            .sum())
    }
}

/// Free-function forms of the kernel evaluations.
pub fn eval_green(t: f64, x: f64, y: f64, kernel: &GreenKernel) -> Result<f64> {
    kernel.eval_green(t, x, y)
}

pub fn eval_green_dy(t: f64, x: f64, y: f64, kernel: &GreenKernel) -> Result<f64> {
    kernel.eval_green_dy(t, x, y)
}

/// Sine/cosine tables on the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct SineBasis {
    grid: SpatialGrid,
    n_modes: usize,
    /// `sin[n-1][i] = e_n(x_i)`
    sin: Vec<Vec<f64>>,
    /// `dcos[n-1][i] = d/dy e_n(y)` at `y = x_i`
    dcos: Vec<Vec<f64>>,
}

impl SineBasis {
    pub fn new(grid: SpatialGrid, kernel: &GreenKernel) -> Result<Self> {
        if kernel.n_modes >= grid.n_cells() {
            return Err(SpdeError::domain(format!(
                "kernel with {} modes does not match a grid with {} cells",
                kernel.n_modes,
                grid.n_cells()
            )));
        }
        let sin = (1..=kernel.n_modes)
            .map(|n| grid.interior_nodes().map(|x| eigenfunction(n, x)).collect())
            .collect();
        let dcos = (1..=kernel.n_modes)
            .map(|n| {
                let k = n as f64 * PI;
                grid.interior_nodes().map(|x| SQRT_2 * k * (k * x).cos()).collect()
            })
            .collect();
        Ok(Self {
            grid,
            n_modes: kernel.n_modes,
            sin,
            dcos,
        })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `⟨v, e_n⟩` in the discrete H pairing.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        self.sin
            .iter()
            .map(|row| dx * row.iter().zip(values).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// `∫ e_n'(y) v(y) dy` with `v` extended by zero to the boundary.
    pub fn project_dy(&self, values: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        self.dcos
            .iter()
            .map(|row| dx * row.iter().zip(values).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Raw sums `Σ_i e_n(x_i) w_i` (no `dx`), used for noise panels.
    pub fn project_increment(&self, weights: &[f64]) -> Vec<f64> {
        self.sin
            .iter()
            .map(|row| row.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_interior()];
        for (row, c) in self.sin.iter().zip(coeffs) {
            for (o, e) in out.iter_mut().zip(row) {
                *o += c * e;
            }
        }
        out
    }

    /// Applies the semigroup `G_t` to a nodal profile (spectrally truncated).
    pub fn heat_semigroup(&self, t: f64, values: &[f64]) -> Result<Vec<f64>> {
        check_time(t)?;
        let mut c = self.project(values);
        for (n, cn) in c.iter_mut().enumerate() {
            *cn *= (-eigenvalue(n + 1) * t).exp();
        }
        Ok(self.synthesize(&c))
    }

    /// `A v` computed mode by mode, `-Σ λ_n ⟨v, e_n⟩ e_n`.
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.project(values);
        for (n, cn) in c.iter_mut().enumerate() {
            *cn *= -eigenvalue(n + 1);
        }
        self.synthesize(&c)
    }
}

/// Per-step exponential factors for a fixed `dt`.
#[derive(Debug, Clone)]
pub(crate) struct ModeStepper {
    pub decay: Vec<f64>,
    /// `∫_0^dt e^{-λ s} ds = (1 - e^{-λ dt}) / λ`
    pub drift_gain: Vec<f64>,
    /// `(1 - e^{-λ dt}) / (λ dt)`, the conditional mean of the exponentially
    /// weighted noise integral given the increment.
    pub noise_gain: Vec<f64>,
}

impl ModeStepper {
    pub fn new(n_modes: usize, dt: f64) -> Self {
        let mut decay = Vec::with_capacity(n_modes);
        let mut drift_gain = Vec::with_capacity(n_modes);
        let mut noise_gain = Vec::with_capacity(n_modes);
        for n in 1..=n_modes {
            let l = eigenvalue(n);
            let e = (-l * dt).exp();
            decay.push(e);
            drift_gain.push(-(-l * dt).exp_m1() / l);
            noise_gain.push(-(-l * dt).exp_m1() / (l * dt));
        }
        Self {
            decay,
            drift_gain,
            noise_gain,
        }
    }
}

fn validate_series(v: &[Field], t: f64) -> Result<()> {
    let first = v
        .first()
        .ok_or_else(|| SpdeError::domain("apply_J needs a non-empty time series"))?;
    if first.t > 0.0 {
        return Err(SpdeError::domain(format!(
            "time series starts at {} > 0; v must be defined on [0, t]",
            first.t
        )));
    }
    if v.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(SpdeError::domain("time series must be strictly increasing"));
    }
    check_time(t)
}

/// `J(v)(t, ·) = ∫_0^t ∫_0^1 H(r, t; ·, y) v(r, y) dy dr`.
///
/// `v` is read as piecewise constant in time (value at `v[k].t` held until the
/// next sample, the last one held until `t`). The time integral of each mode
/// against the exponential is done in closed form, so the `(t - r)` singularity
/// near `r = t` costs no accuracy.
pub fn apply_j(v: &[Field], kind: KernelKind, t: f64, kernel: &GreenKernel) -> Result<Field> {
    validate_series(v, t)?;
    let grid = v[0].grid;
    let basis = SineBasis::new(grid, kernel)?;
    let mut acc = vec![0.0; kernel.n_modes];
    for (k, field) in v.iter().enumerate() {
        if field.t >= t {
            break;
        }
        let s0 = field.t.max(0.0);
        let s1 = v.get(k + 1).map_or(t, |next| next.t.min(t));
        let c = match kind {
            KernelKind::Gauss => basis.project(&field.values),
            KernelKind::GaussDy => basis.project_dy(&field.values),
        };
        for (n, (a, cn)) in acc.iter_mut().zip(&c).enumerate() {
            let l = eigenvalue(n + 1);
            // ∫_{s0}^{s1} e^{-λ(t-r)} dr
            let w = ((-l * (t - s1)).exp() - (-l * (t - s0)).exp()) / l;
            *a += cn * w;
        }
    }
    Ok(Field::from_values(grid, t, basis.synthesize(&acc)))
}

/// Discrete `L^p` norm `(dx Σ |v_i|^p)^{1/p}`; `p = ∞` gives the max norm.
pub fn lp_norm(values: &[f64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        (dx * values.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// `∫_0^t (t - s)^{κ/2 - 1} |v(s, ·)|_q ds` for piecewise-constant `v`,
/// `κ = 1 + 1/ρ - 1/q`.
pub fn j_bound_integral(v: &[Field], t: f64, q: f64, rho: f64) -> Result<f64> {
    validate_series(v, t)?;
    let kappa = 1.0 + 1.0 / rho - 1.0 / q;
    if kappa <= 0.0 {
        return Err(SpdeError::domain("need κ = 1 + 1/ρ - 1/q > 0"));
    }
    let a = kappa / 2.0;
    let mut total = 0.0;
    for (k, field) in v.iter().enumerate() {
        if field.t >= t {
            break;
        }
        let s0 = field.t.max(0.0);
        let s1 = v.get(k + 1).map_or(t, |next| next.t.min(t));
        let w = ((t - s0).powf(a) - (t - s1).powf(a)) / a;
        total += w * lp_norm(&field.values, field.grid.dx(), q);
    }
    Ok(total)
}

/// Constant `C₁` for the `L¹ → L²` bound of `J`.
///
/// By Minkowski, `|J(v)(t)|_2 ≤ ∫ sup_y |H_{t-s}(·, y)|_2 |v(s)|_1 ds`, so
/// `C₁ = sup_{τ ≤ T, y} τ^{3/4} |H_τ(·, y)|_2` works. The sup over `τ` is taken
/// on a dense log lattice; `(1 + 1e-3)` covers lattice resolution.
pub fn fit_j_bound_constant(grid: SpatialGrid, kernel: &GreenKernel, kind: KernelKind, horizon: f64) -> Result<f64> {
    let basis = SineBasis::new(grid, kernel)?;
    let exponent = 0.75;
    let n_tau = 2000;
    let tau_min: f64 = 1e-7;
    let mut best = 0.0f64;
    for j in 0..=n_tau {
        let tau = tau_min * (horizon / tau_min).powf(j as f64 / n_tau as f64);
        for i in 0..grid.n_interior() {
            // modal coefficients of H_τ(·, y) at y = x_i; Parseval gives the L² norm
            let norm2: f64 = (0..basis.n_modes)
                .map(|n| {
                    let ey = match kind {
                        KernelKind::Gauss => basis.sin[n][i],
                        KernelKind::GaussDy => basis.dcos[n][i],
                    };
                    let c = ey * (-eigenvalue(n + 1) * tau).exp();
                    c * c
                })
                .sum();
            best = best.max(tau.powf(exponent) * norm2.sqrt());
        }
    }
    Ok(best * (1.0 + 1e-3))
}

/// Stochastic convolution `η(t) = ∫∫ G_{t-s}(·, y) σ(s, y, u(s, y)) W(dy ds)`
/// along one trajectory.
#[derive(Debug, Clone)]
pub struct StochasticConvolution {
    pub eta: Vec<Field>,
    /// Running `sup_{s ≤ t, x} |η(s, x)|` at each sample.
    pub eta_star: Vec<f64>,
}

impl StochasticConvolution {
    pub fn sup(&self) -> f64 {
        self.eta_star.last().copied().unwrap_or(0.0)
    }
}

/// Spectral state of the mild-form pieces, advanced one solver step at a time.
#[derive(Debug, Clone)]
pub(crate) struct ConvolutionState {
    pub basis: SineBasis,
    pub stepper: ModeStepper,
    pub coeffs: Vec<f64>,
}

impl ConvolutionState {
    pub fn new(basis: SineBasis, dt: f64) -> Self {
        let n = basis.n_modes();
        Self {
            stepper: ModeStepper::new(n, dt),
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// Adds a noise panel weighted pointwise: `Σ_i e_n(x_i) w_i dW_i`.
    pub fn advance_noise(&mut self, weighted_dw: &[f64]) {
        let xi = self.basis.project_increment(weighted_dw);
        for n in 0..self.coeffs.len() {
            self.coeffs[n] = self.stepper.decay[n] * self.coeffs[n] + self.stepper.noise_gain[n] * xi[n];
        }
    }

    /// One step with a drift held constant over the step (modal coefficients)
    /// plus a weighted noise panel.
    pub fn advance(&mut self, drift: &[f64], weighted_dw: &[f64]) {
        let xi = self.basis.project_increment(weighted_dw);
        let st = &self.stepper;
        for n in 0..self.coeffs.len() {
            self.coeffs[n] = st.decay[n] * self.coeffs[n] + st.drift_gain[n] * drift[n] + st.noise_gain[n] * xi[n];
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.basis.synthesize(&self.coeffs)
    }
}

/// Replays the trajectory's noise stream to build `η` at every sample.
///
/// The trajectory must be saved at every step (`save_every = 1`), since `σ`
/// is evaluated on the state at the start of each step.
pub fn stochastic_convolution(traj: &Trajectory, sigma: &ScalarCoef, kernel: &GreenKernel) -> Result<StochasticConvolution> {
    traj.require_every_step()?;
    let grid = traj.grid();
    let basis = SineBasis::new(grid, kernel)
        .map_err(|e| SpdeError::ReplayMismatch(format!("grid/kernel mismatch: {e}")))?;
    let dt = traj.dt;
    let rng = RngStream::new(traj.seed, traj.stream_id);
    let mut state = ConvolutionState::new(basis, dt);
    let mut panel = vec![0.0; grid.n_interior()];
    let mut eta = Vec::with_capacity(traj.samples.len());
    let mut eta_star = Vec::with_capacity(traj.samples.len());
    let mut running = 0.0f64;

    eta.push(Field::zeros(grid, traj.samples[0].t));
    eta_star.push(0.0);
    for (k, pair) in traj.samples.windows(2).enumerate() {
        let u = &pair[0];
        fill_panel(&mut panel, grid, dt, &rng, traj.first_step + k as u64);
        for (i, w) in panel.iter_mut().enumerate() {
            *w *= sigma.eval(u.t, grid.x(i), u.values[i]);
        }
        state.advance_noise(&panel);
        let values = state.values();
        running = running.max(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        eta.push(Field::from_values(grid, pair[1].t, values));
        eta_star.push(running);
    }
    Ok(StochasticConvolution { eta, eta_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel64() -> GreenKernel {
        GreenKernel::new(64).unwrap()
    }

    /// Composite trapezoid on [0, 1]; the integrands vanish at both ends.
    fn trapezoid(f: impl Fn(f64) -> f64, m: usize) -> f64 {
        let h = 1.0 / m as f64;
        (1..m).map(|j| f(j as f64 * h)).sum::<f64>() * h + 0.5 * h * (f(0.0) + f(1.0))
    }

    #[test]
    fn green_is_symmetric() {
        let k = kernel64();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t: f64 = rng.random_range(0.001..1.0);
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            assert_eq!(k.eval_green(t, x, y).unwrap(), k.eval_green(t, y, x).unwrap());
        }
    }

    #[test]
    fn green_rejects_non_positive_time() {
        let k = kernel64();
        assert!(matches!(k.eval_green(0.0, 0.3, 0.4), Err(SpdeError::Domain(_))));
        assert!(k.eval_green_dy(-1.0, 0.3, 0.4).is_err());
    }

    #[test]
    fn semigroup_identity() {
        let k = kernel64();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let times = [0.01, 0.05, 0.2];
        let mut worst = 0.0f64;
        for &t in &times {
            for &s in &times {
                for _ in 0..20 {
                    let x: f64 = rng.random();
                    let z: f64 = rng.random();
                    let lhs = trapezoid(|y| k.eval_green(t, x, y).unwrap() * k.eval_green(s, y, z).unwrap(), 512);
                    let rhs = k.eval_green(t + s, x, z).unwrap();
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn heat_equation_identity_by_finite_differences() {
        let k = kernel64();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &t in &[0.05, 0.1, 0.3] {
            let mut scale = 0.0f64;
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                let fd = (k.eval_green(t + h, x, y).unwrap() - k.eval_green(t - h, x, y).unwrap()) / (2.0 * h);
                let exact = k.eval_green_dt(t, x, y).unwrap();
                scale = scale.max(exact.abs());
                worst = worst.max((fd - exact).abs());
            }
            assert!(worst / scale < 1e-4, "t={t}: {}", worst / scale);
        }
    }

    #[test]
    fn dy_integrates_to_zero() {
        let k = kernel64();
        for &x in &[0.2, 0.5, 0.77] {
            let total = trapezoid(|y| k.eval_green_dy(0.1, x, y).unwrap(), 4096);
            assert!(total.abs() < 1e-8, "{total}");
        }
    }

    #[test]
    fn dy_matches_finite_difference_in_y() {
        let k = kernel64();
        let h = 1e-5;
        for &(t, x, y) in &[(0.05, 0.3, 0.4), (0.1, 0.7, 0.2), (0.2, 0.5, 0.9)] {
            let fd = (k.eval_green(t, x, y + h).unwrap() - k.eval_green(t, x, y - h).unwrap()) / (2.0 * h);
            let an = k.eval_green_dy(t, x, y).unwrap();
            assert!(((fd - an) / an).abs() < 1e-4, "{fd} vs {an}");
        }
    }

    #[test]
    fn dy_at_large_time_is_first_mode() {
        let k = kernel64();
        let (x, y) = (0.3, 0.2);
        let first = 2.0 * PI * (PI * x).sin() * (PI * y).cos() * (-PI * PI).exp();
        let full = k.eval_green_dy(1.0, x, y).unwrap();
        assert!(((full - first) / first).abs() < 1e-6);
    }

    #[test]
    fn discrete_orthonormality() {
        let grid = SpatialGrid::new(128).unwrap();
        let k = GreenKernel::for_grid(&grid);
        let basis = SineBasis::new(grid, &k).unwrap();
        for m in 0..k.n_modes {
            let c = basis.project(&basis.sin[m]);
            for (n, cn) in c.iter().enumerate() {
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((cn - want).abs() < 1e-8);
            }
        }
    }

    fn constant_series(grid: SpatialGrid, values: Vec<f64>, times: &[f64]) -> Vec<Field> {
        times.iter().map(|&t| Field::from_values(grid, t, values.clone())).collect()
    }

    #[test]
    fn apply_j_on_first_mode_has_closed_form() {
        let grid = SpatialGrid::new(64).unwrap();
        let k = GreenKernel::for_grid(&grid);
        let e1: Vec<f64> = grid.interior_nodes().map(|x| eigenfunction(1, x)).collect();
        let times: Vec<f64> = (0..10).map(|j| j as f64 * 0.05).collect();
        let v = constant_series(grid, e1.clone(), &times);
        let out = apply_j(&v, KernelKind::Gauss, 0.5, &k).unwrap();
        let l = PI * PI;
        let factor = (1.0 - (-l * 0.5).exp()) / l;
        for (o, e) in out.values.iter().zip(&e1) {
            assert!((o - e * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_j_zero_and_empty() {
        let grid = SpatialGrid::new(16).unwrap();
        let k = GreenKernel::for_grid(&grid);
        let v = constant_series(grid, vec![0.0; 15], &[0.0, 0.1]);
        let out = apply_j(&v, KernelKind::GaussDy, 0.3, &k).unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
        assert!(apply_j(&[], KernelKind::Gauss, 0.3, &k).is_err());
    }

    #[test]
    fn apply_j_is_linear() {
        let grid = SpatialGrid::new(32).unwrap();
        let k = GreenKernel::for_grid(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let times = [0.0, 0.02, 0.05, 0.11];
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Field> {
            times
                .iter()
                .map(|&t| Field::from_values(grid, t, (0..31).map(|_| rng.random_range(-1.0..1.0)).collect()))
                .collect()
        };
        let v = mk(&mut rng);
        let w = mk(&mut rng);
        let alpha = -1.7;
        let comb: Vec<Field> = v
            .iter()
            .zip(&w)
            .map(|(a, b)| Field::from_values(grid, a.t, a.values.iter().zip(&b.values).map(|(p, q)| alpha * p + q).collect()))
            .collect();
        for kind in [KernelKind::Gauss, KernelKind::GaussDy] {
            let jv = apply_j(&v, kind, 0.2, &k).unwrap();
            let jw = apply_j(&w, kind, 0.2, &k).unwrap();
            let jc = apply_j(&comb, kind, 0.2, &k).unwrap();
            for i in 0..31 {
                let want = alpha * jv.values[i] + jw.values[i];
                assert!((jc.values[i] - want).abs() < 1e-12 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn apply_j_smooths_spikes() {
        // fixed mass, narrowing support: output H-norm stays bounded
        let grid = SpatialGrid::new(256).unwrap();
        let k = GreenKernel::for_grid(&grid);
        let mut norms = Vec::new();
        for width in [32usize, 8, 2, 1] {
            let mut v = vec![0.0; 255];
            let centre = 127;
            for j in 0..width {
                v[centre - width / 2 + j] = 1.0 / (width as f64 * grid.dx());
            }
            let series = constant_series(grid, v, &[0.0]);
            let out = apply_j(&series, KernelKind::Gauss, 0.1, &k).unwrap();
            norms.push(out.h_norm());
        }
        assert!(norms.iter().all(|n| n.is_finite() && *n < 1.0), "{norms:?}");
        let spread = norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1.1);
    }
}
