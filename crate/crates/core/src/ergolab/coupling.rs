use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::solver::{simulate, Field, PathRunner, SimConfig};
use crate::stats;

use super::measure::wasserstein_1;
use super::{krylov_bogolyubov, Binning, Observable};

/// Bootstrap replicates per observable and run.
pub const BOOTSTRAP_REPLICATES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableDistance {
    pub name: String,
    /// `W_1` between the two empirical laws
    pub distance: f64,
    /// `sqrt(n1² + n2²)`, with `n_k` the RMS `W_1` between a block-bootstrap
    /// replicate of run `k` and run `k` itself
    pub noise: f64,
}

impl ObservableDistance {
    pub fn ratio(&self) -> f64 {
        self.distance / self.noise
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub distances: Vec<ObservableDistance>,
    pub burn_in: f64,
    pub horizon: f64,
}

impl UniquenessReport {
    pub fn max_ratio(&self) -> f64 {
        self.distances.iter().map(ObservableDistance::ratio).fold(0.0, f64::max)
    }

    /// Every distance within `factor` times its noise.
    pub fn within(&self, factor: f64) -> bool {
        self.distances.iter().all(|d| d.distance <= factor * d.noise)
    }
}

/// Moving-block bootstrap spread of the empirical law of `xs`.
fn bootstrap_noise(xs: &[f64], rng: &mut ChaCha8Rng, replicates: usize) -> f64 {
    let n = xs.len();
    let block = (2.0 * stats::integrated_autocorr_time(xs)).ceil().max(1.0) as usize;
    let block = block.min(n);
    let mut sum_sq = 0.0;
    let mut rep = Vec::with_capacity(n);
    for _ in 0..replicates {
        rep.clear();
        while rep.len() < n {
            let start = rng.random_range(0..=n - block);
            let take = block.min(n - rep.len());
            rep.extend_from_slice(&xs[start..start + take]);
        }
        sum_sq += wasserstein_1(&rep, xs).powi(2);
    }
    (sum_sq / replicates as f64).sqrt()
}

/// Runs `f1` on `cfg.stream_id` and `f2` on `cfg.stream_id + 1` (independent
/// noise) and compares the time-averaged laws over `(burn_in, T]`.
pub fn uniqueness_probe(f1: &Field, f2: &Field, cfg: &SimConfig, observables: &[Observable], burn_in: f64) -> Result<UniquenessReport> {
    let c1 = cfg.clone().with_initial(f1.clone());
    let c2 = cfg.clone().with_initial(f2.clone()).with_stream(cfg.stream_id.wrapping_add(1));
    let (t1, t2) = rayon::join(|| simulate(&c1), || simulate(&c2));
    let binning = Binning::Count(10);
    let m1 = krylov_bogolyubov(&t1?, burn_in, observables, &binning)?;
    let m2 = krylov_bogolyubov(&t2?, burn_in, observables, &binning)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_b007);
    let distances = m1
        .histograms
        .iter()
        .zip(&m2.histograms)
        .map(|(a, b)| {
            let n1 = bootstrap_noise(&a.samples, &mut rng, BOOTSTRAP_REPLICATES);
            let n2 = bootstrap_noise(&b.samples, &mut rng, BOOTSTRAP_REPLICATES);
            ObservableDistance {
                name: a.name.clone(),
                distance: wasserstein_1(&a.samples, &b.samples),
                noise: n1.hypot(n2),
            }
        })
        .collect();
    Ok(UniquenessReport {
        distances,
        burn_in,
        horizon: m1.horizon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCurve {
    pub times: Vec<f64>,
    /// `|u1(t) - u2(t)|_H`
    pub distance: Vec<f64>,
}

impl CouplingCurve {
    /// True if the curve never increases after `t0` (up to `tol`).
    pub fn non_increasing_after(&self, t0: f64, tol: f64) -> bool {
        let tail: Vec<f64> = self
            .times
            .iter()
            .zip(&self.distance)
            .filter(|(t, _)| **t >= t0)
            .map(|(_, d)| *d)
            .collect();
        tail.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Both paths driven by the same noise (`cfg.seed`, `cfg.stream_id`); the
/// distance is recorded every `cfg.save_every` steps.
pub fn synchronous_coupling(f1: &Field, f2: &Field, cfg: &SimConfig) -> Result<CouplingCurve> {
    cfg.validate()?;
    let mut a = PathRunner::new(&cfg.clone().with_initial(f1.clone()))?;
    let mut b = PathRunner::new(&cfg.clone().with_initial(f2.clone()))?;
    let mut times = vec![f1.t];
    let mut distance = vec![f1.distance(f2)];
    let n_steps = cfg.n_steps();
    for k in 1..=n_steps {
        a.advance(None)?;
        b.advance(None)?;
        if k % cfg.save_every as u64 == 0 || k == n_steps {
            times.push(a.state.t);
            distance.push(a.state.distance(&b.state));
        }
    }
    Ok(CouplingCurve { times, distance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientSet;
    use crate::grid_noise::SpatialGrid;

    #[test]
    fn identical_starts_give_zero_curve() {
        let grid = SpatialGrid::new(32).unwrap();
        let f = Field::mode(grid, 2, 1.0);
        let cfg = SimConfig::new(grid, 1e-3, 0.2, CoefficientSet::additive_heat(1.0)).with_seed(5, 0);
        let curve = synchronous_coupling(&f, &f, &cfg).unwrap();
        assert!(curve.distance.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn additive_noise_cancels_in_the_difference() {
        let grid = SpatialGrid::new(128).unwrap();
        let f1 = Field::mode(grid, 1, 1.0);
        let f2 = Field::zeros(grid, 0.0);
        let cfg = SimConfig::new(grid, 1e-5, 0.1, CoefficientSet::additive_heat(1.0))
            .with_seed(5, 0)
            .with_save_every(1000);
        let curve = synchronous_coupling(&f1, &f2, &cfg).unwrap();
        for (t, d) in curve.times.iter().zip(&curve.distance) {
            let exact = (-std::f64::consts::PI.powi(2) * t).exp();
            assert!((d - exact).abs() <= 1e-3, "t = {t}: {d} vs {exact}");
        }
    }

    #[test]
    fn bootstrap_noise_of_iid_samples_scales_like_root_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..4000).map(|_| rng.random::<f64>()).collect();
        let mut brng = ChaCha8Rng::seed_from_u64(2);
        let small = bootstrap_noise(&xs[..1000], &mut brng, 100);
        let large = bootstrap_noise(&xs, &mut brng, 100);
        let ratio = small / large;
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }
}
