use crate::error::{Result, SpdeError};
use crate::solver::Trajectory;
use crate::stats;

use super::Observable;

/// How histogram bins are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Binning {
    /// equal-width bins spanning the observed range
    Count(usize),
    Edges(Vec<f64>),
}

/// Time-averaged law of one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableHistogram {
    pub name: String,
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    /// observable values at the averaged sample times, in time order
    pub samples: Vec<f64>,
}

impl ObservableHistogram {
    pub fn mean(&self) -> f64 {
        stats::mean(&self.samples)
    }

    pub fn variance(&self) -> f64 {
        stats::variance(&self.samples)
    }
}

/// Uniform-in-time average of `δ_{u(s)}` over `(burn_in, T]`, seen through
/// the chosen observables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub histograms: Vec<ObservableHistogram>,
    /// weight of each averaged sample
    pub weight: f64,
    pub burn_in: f64,
    pub horizon: f64,
}

impl EmpiricalMeasure {
    pub fn get(&self, name: &str) -> Option<&ObservableHistogram> {
        self.histograms.iter().find(|h| h.name == name)
    }
}

pub fn equal_width_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let n_bins = n_bins.max(1);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let w = (hi - lo) / n_bins as f64;
    let mut edges: Vec<f64> = (0..n_bins).map(|k| lo + k as f64 * w).collect();
    edges.push(hi);
    edges
}

/// Mass per bin; values outside the edges are counted in the end bins, so the
/// masses always sum to one.
pub fn histogram(samples: &[f64], edges: &[f64]) -> Vec<f64> {
    let n_bins = edges.len() - 1;
    let mut counts = vec![0usize; n_bins];
    for &v in samples {
        let k = edges[1..n_bins].partition_point(|e| *e <= v);
        counts[k] += 1;
    }
    let total = samples.len() as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

fn resolve_edges(samples: &[f64], binning: &Binning) -> Result<Vec<f64>> {
    match binning {
        Binning::Count(n) => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(equal_width_edges(lo, hi, *n))
        }
        Binning::Edges(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(SpdeError::domain("bin edges must be strictly increasing"));
            }
            Ok(e.clone())
        }
    }
}

/// Krylov–Bogolyubov average of each observable over `(burn_in, T]`.
pub fn krylov_bogolyubov(traj: &Trajectory, burn_in: f64, observables: &[Observable], binning: &Binning) -> Result<EmpiricalMeasure> {
    let horizon = traj.last().t;
    if !(horizon > burn_in) {
        return Err(SpdeError::domain(format!(
            "horizon {horizon} is not longer than the burn-in {burn_in}"
        )));
    }
    let kept: Vec<_> = traj.samples.iter().filter(|f| f.t > burn_in).collect();
    if kept.is_empty() {
        return Err(SpdeError::domain("no samples after the burn-in"));
    }

    let energy: Vec<f64> = kept.iter().map(|f| f.h_norm_sq()).collect();
    let sample_dt = if kept.len() > 1 { kept[1].t - kept[0].t } else { horizon - burn_in };
    let tau = stats::integrated_autocorr_time(&energy) * sample_dt;
    if horizon - burn_in < 10.0 * tau {
        log::warn!(
            "averaging window {} is shorter than 10 autocorrelation times of |u|²_H ({tau})",
            horizon - burn_in
        );
    }

    let histograms = observables
        .iter()
        .map(|obs| {
            let samples: Vec<f64> = kept.iter().map(|f| obs.eval(f)).collect();
            let edges = resolve_edges(&samples, binning)?;
            Ok(ObservableHistogram {
                name: obs.name.clone(),
                masses: histogram(&samples, &edges),
                edges,
                samples,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EmpiricalMeasure {
        histograms,
        weight: 1.0 / kept.len() as f64,
        burn_in,
        horizon,
    })
}

/// Total variation between the two sample sets, binned on common equal-width
/// edges over the pooled range.
pub fn tv_distance(a: &[f64], b: &[f64], n_bins: usize) -> f64 {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let edges = equal_width_edges(lo, hi, n_bins);
    let (pa, pb) = (histogram(a, &edges), histogram(b, &edges));
    0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `W_1` between two empirical laws on the line, `∫_0^1 |F⁻¹(p) - G⁻¹(p)| dp`,
/// computed exactly by merging the two quantile functions.
pub fn wasserstein_1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut p = 0.0f64;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let q = next_a.min(next_b);
        total += (q - p) * (xs[i] - ys[j]).abs();
        p = q;
        if next_a <= q {
            i += 1;
        }
        if next_b <= q {
            j += 1;
        }
    }
    total
}
