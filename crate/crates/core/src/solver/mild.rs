use crate::error::{Result, SpdeError};
use crate::grid_noise::{fill_panel, RngStream};
use crate::heat_kernel::{ConvolutionState, GreenKernel, SineBasis};

use super::field::h_norm_sq;
use super::{SimConfig, Trajectory};

/// Largest H-distance between the computed path and the right side of the
/// mild formulation
/// `u(t) = G_t f + J_G(κ b(u))(t) - J_{∂G}(κ g(u))(t) + η(t)`,
/// each piece assembled spectrally from the saved states and the replayed noise.
pub fn mild_residual(traj: &Trajectory, cfg: &SimConfig, kernel: &GreenKernel) -> Result<f64> {
    traj.require_every_step()?;
    let grid = traj.grid();
    if grid != cfg.grid || traj.dt != cfg.dt || traj.seed != cfg.seed || traj.stream_id != cfg.stream_id {
        return Err(SpdeError::ReplayMismatch("trajectory was not produced by this configuration".into()));
    }
    let basis = SineBasis::new(grid, kernel)?;
    let coeffs = cfg.effective_coefficients()?;
    let dx = grid.dx();
    let n = grid.n_interior();
    let rng = RngStream::new(traj.seed, traj.stream_id);

    let mut state = ConvolutionState::new(basis.clone(), cfg.dt);
    state.coeffs = basis.project(&traj.samples[0].values);

    let mut b_vals = vec![0.0; n];
    let mut g_vals = vec![0.0; n];
    let mut noise = vec![0.0; n];
    let mut worst = 0.0f64;

    for (k, pair) in traj.samples.windows(2).enumerate() {
        let u = &pair[0];
        let t = u.t;
        let gate = cfg.truncation.map_or(1.0, |g| g.value(h_norm_sq(&u.values, dx)));
        for i in 0..n {
            let x = grid.x(i);
            b_vals[i] = gate * coeffs.b.eval(t, x, u.values[i]);
            g_vals[i] = gate * coeffs.g(t, x, u.values[i]);
        }
        let mut drift = basis.project(&b_vals);
        if coeffs.has_flux() {
            for (d, gd) in drift.iter_mut().zip(basis.project_dy(&g_vals)) {
                *d -= gd;
            }
        }
        if let Some(hook) = &cfg.drift_hook {
            if let Some(f) = hook(t, u) {
                for (d, fd) in drift.iter_mut().zip(basis.project(&f)) {
                    *d += fd;
                }
            }
        }
        fill_panel(&mut noise, grid, cfg.dt, &rng, traj.first_step + k as u64);
        for i in 0..n {
            noise[i] *= coeffs.sigma.eval(t, grid.x(i), u.values[i]);
        }
        state.advance(&drift, &noise);
        let rhs = state.values();
        let err = dx * pair[1].values.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        worst = worst.max(err.sqrt());
    }
    Ok(worst)
}
