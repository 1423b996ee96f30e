//! Spatial grid on `[0, 1]` and discretized space-time white noise.
//!
//! The noise is cell-wise: every interior node carries one Brownian-sheet
//! increment per time step, drawn from `N(0, dt * dx)`. Panels are produced by
//! a counter-based generator keyed by `(seed, stream_id, step_index)`, so any
//! panel can be regenerated without replaying the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SpdeError};
use crate::heat_kernel::eigenfunction;

/// Uniform grid with Dirichlet ends; only the `n_cells - 1` interior nodes are unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_cells: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 4 {
            return Err(SpdeError::config(format!(
                "grid.n_cells must be at least 4 (got {n_cells})"
            )));
        }
        Ok(Self {
            n_cells,
            dx: 1.0 / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Number of interior unknowns.
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    /// Position of interior node `i` (0-based), i.e. `x_{i+1} = (i + 1) dx`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.n_cells as f64
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_interior()).map(move |i| self.x(i))
    }

    /// Index of the interior node closest to `x0`.
    pub fn nearest_node(&self, x0: f64) -> usize {
        let k = (x0 * self.n_cells as f64).round() as isize - 1;
        k.clamp(0, self.n_interior() as isize - 1) as usize
    }
}

/// Reproducible noise source for one trajectory.
///
/// `step` is the position of the next panel; [`RngStream::at_step`] rewinds or
/// fast-forwards without drawing anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    step: u64,
    key: [u8; 32],
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self {
            seed,
            stream_id,
            step: 0,
            key,
        }
    }

    pub fn at_step(&self, step: u64) -> Self {
        Self {
            step,
            ..self.clone()
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn reset(&mut self) {
        self.step = 0;
    }

    /// Generator positioned at the start of panel `step`.
    ///
    /// Each panel owns a window of 2^32 words of the ChaCha block counter.
    fn panel_rng(&self, step: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((step as u128) << 32);
        rng
    }
}

/// Stream id for path `index` of an experiment role; roles occupy disjoint
/// blocks of 2^32 streams.
pub fn role_stream(role: u32, index: u32) -> u64 {
    ((role as u64) << 32) | index as u64
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One panel of Brownian-sheet increments over the interior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
    pub grid: SpatialGrid,
}

impl NoiseIncrement {
    pub fn zeros(grid: SpatialGrid, dt: f64) -> Self {
        Self {
            dw: vec![0.0; grid.n_interior()],
            dt,
            grid,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dw: self.dw.iter().map(|w| a * w).collect(),
            ..*self
        }
    }
}

/// Draws the next panel from `rng` and advances it by one step.
pub fn sample_noise(grid: SpatialGrid, dt: f64, rng: &mut RngStream) -> Result<NoiseIncrement> {
    let panel = panel_at(grid, dt, rng, rng.step)?;
    rng.step += 1;
    Ok(panel)
}

/// Regenerates panel `step` of `rng` without touching its position.
pub fn panel_at(grid: SpatialGrid, dt: f64, rng: &RngStream, step: u64) -> Result<NoiseIncrement> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SpdeError::config(format!("time.dt must be positive (got {dt})")));
    }
    let mut dw = vec![0.0; grid.n_interior()];
    fill_panel(&mut dw, grid, dt, rng, step);
    Ok(NoiseIncrement { dw, dt, grid })
}

/// Writes panel `step` into `out` (length `grid.n_interior()`); `dt` must be positive.
pub(crate) fn fill_panel(out: &mut [f64], grid: SpatialGrid, dt: f64, rng: &RngStream, step: u64) {
    let scale = (dt * grid.dx()).sqrt();
    let mut g = rng.panel_rng(step);
    for w in out.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut g);
        *w = scale * z;
    }
}

/// Discrete increment of the `n`-th cylindrical Brownian motion, `Σ_i e_n(x_i) dW_i`.
pub fn project_mode(dw: &NoiseIncrement, n: usize) -> Result<f64> {
    let grid = dw.grid;
    if n == 0 || n >= grid.n_cells() {
        return Err(SpdeError::domain(format!(
            "mode index {n} outside 1..={}",
            grid.n_cells() - 1
        )));
    }
    Ok(dw
        .dw
        .iter()
        .enumerate()
        .map(|(i, w)| eigenfunction(n, grid.x(i)) * w)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pooled(grid: SpatialGrid, dt: f64, seed: u64, stream: u64, n_panels: usize) -> Vec<f64> {
        let mut rng = RngStream::new(seed, stream);
        (0..n_panels)
            .flat_map(|_| sample_noise(grid, dt, &mut rng).unwrap().dw)
            .collect()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn grid_rejects_too_few_cells() {
        assert!(SpatialGrid::new(3).is_err());
        let g = SpatialGrid::new(4).unwrap();
        assert_eq!(g.n_interior(), 3);
        assert_eq!(g.dx() * g.n_cells() as f64, 1.0);
    }

    #[test]
    fn reset_reproduces_panels() {
        let grid = SpatialGrid::new(64).unwrap();
        let mut rng = RngStream::new(1, 0);
        let a = sample_noise(grid, 1e-3, &mut rng).unwrap();
        let a2 = sample_noise(grid, 1e-3, &mut rng).unwrap();
        rng.reset();
        let b = sample_noise(grid, 1e-3, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, a2);
        assert_eq!(panel_at(grid, 1e-3, &rng, 1).unwrap(), a2);
    }

    #[test]
    fn non_positive_dt_is_rejected() {
        let grid = SpatialGrid::new(8).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(sample_noise(grid, 0.0, &mut rng), Err(SpdeError::Config(_))));
        assert!(sample_noise(grid, -1.0, &mut rng).is_err());
    }

    #[test]
    fn pooled_variance_matches_dt_dx() {
        let grid = SpatialGrid::new(64).unwrap();
        let dt = 1e-3;
        // 63 entries per panel, 15_874 panels ≈ 10^6 entries
        let xs = pooled(grid, dt, 7, 0, 15_874);
        let target = dt * grid.dx();
        let (m, v) = mean_var(&xs);
        let n = xs.len() as f64;
        // Gaussian: Var(sample variance) = 2σ⁴/(n-1)
        let se_var = target * (2.0 / (n - 1.0)).sqrt();
        assert!((v - target).abs() < 4.0 * se_var, "var {v} vs {target}");
        assert!(m.abs() < 4.0 * (target / n).sqrt());
    }

    #[test]
    fn halving_dx_halves_variance() {
        let dt = 1e-3;
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for n_cells in [16usize, 32, 64] {
            let grid = SpatialGrid::new(n_cells).unwrap();
            let xs = pooled(grid, dt, 3, n_cells as u64, 200_000 / n_cells);
            let (_, v) = mean_var(&xs);
            lx.push(grid.dx().ln());
            ly.push(v.ln());
        }
        let slope = crate::stats::ols_slope(&lx, &ly);
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let grid = SpatialGrid::new(32).unwrap();
        let a = pooled(grid, 1e-3, 11, 0, 4000);
        let b = pooled(grid, 1e-3, 11, 1, 4000);
        let r = crate::stats::correlation(&a, &b);
        let se = 1.0 / (a.len() as f64).sqrt();
        assert!(r.abs() < 4.0 * se, "corr {r}");
    }

    #[test]
    fn mode_projections_are_brownian_and_uncorrelated() {
        let grid = SpatialGrid::new(32).unwrap();
        let dt = 1e-2;
        let mut rng = RngStream::new(5, 2);
        let n_panels = 100_000;
        let mut b1 = Vec::with_capacity(n_panels);
        let mut b2 = Vec::with_capacity(n_panels);
        for _ in 0..n_panels {
            let p = sample_noise(grid, dt, &mut rng).unwrap();
            b1.push(project_mode(&p, 1).unwrap());
            b2.push(project_mode(&p, 2).unwrap());
        }
        let r = crate::stats::correlation(&b1, &b2);
        assert!(r.abs() < 4.0 / (n_panels as f64).sqrt(), "corr {r}");

        // dx Σ e_n(x_i)² = 1 exactly for 0 < n < n_cells, so Var = dt
        let (_, v) = mean_var(&b1);
        let se = dt * (2.0 / n_panels as f64).sqrt();
        assert!((v - dt).abs() < 4.0 * se, "var {v}");
    }

    #[test]
    fn project_mode_edge_cases() {
        let grid = SpatialGrid::new(16).unwrap();
        let z = NoiseIncrement::zeros(grid, 0.1);
        assert_eq!(project_mode(&z, 3).unwrap(), 0.0);
        assert!(project_mode(&z, 0).is_err());
        assert!(project_mode(&z, 16).is_err());

        let mut rng = RngStream::new(9, 0);
        let p = sample_noise(grid, 0.1, &mut rng).unwrap();
        let a = project_mode(&p.scaled(2.5), 4).unwrap();
        let b = 2.5 * project_mode(&p, 4).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
