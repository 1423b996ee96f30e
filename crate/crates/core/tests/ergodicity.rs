use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use spdelab::coefficients::{make_preset, CoefficientParams, CoefficientSet, Preset};
use spdelab::ergolab::{
    control_drift, irreducibility_report, krylov_bogolyubov, steering_experiment, synchronous_coupling, tv_distance, uniqueness_probe, Binning,
    Observable, ReachStatus, SteeringPlan,
};
use spdelab::grid_noise::SpatialGrid;
use spdelab::heat_kernel::GreenKernel;
use spdelab::solver::{simulate, Field, SimConfig};
use spdelab::stats;
use spdelab::tangent_bel::{strong_feller_probe, truncation_gap};

fn burgers(sigma: f64) -> CoefficientSet {
    make_preset(Preset::Burgers, &CoefficientParams::burgers(sigma)).unwrap()
}

fn rd(alpha: f64, sigma: f64, amp: f64) -> CoefficientSet {
    make_preset(Preset::ReactionDiffusion, &CoefficientParams::reaction_diffusion(alpha, sigma, amp)).unwrap()
}

#[test]
fn deterministic_decay_concentrates_at_zero() {
    let grid = SpatialGrid::new(16).unwrap();
    let cfg = SimConfig::new(grid, 1e-2, 50.0, CoefficientSet::additive_heat(0.0)).with_initial(Field::mode(grid, 1, 1.0));
    let traj = simulate(&cfg).unwrap();
    let m = krylov_bogolyubov(&traj, 5.0, &[Observable::mode_1()], &Binning::Edges(vec![-0.5, -0.1, 0.1, 0.5])).unwrap();
    assert_eq!(m.histograms[0].masses, vec![0.0, 1.0, 0.0]);
}

#[test]
fn horizon_shorter_than_burn_in_is_an_error() {
    let grid = SpatialGrid::new(16).unwrap();
    let traj = simulate(&SimConfig::new(grid, 1e-2, 1.0, CoefficientSet::additive_heat(1.0))).unwrap();
    assert!(krylov_bogolyubov(&traj, 2.0, &[Observable::mode_1()], &Binning::Count(5)).is_err());
}

#[test]
fn thinning_by_two_keeps_the_measure() {
    let grid = SpatialGrid::new(32).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 200.0, CoefficientSet::additive_heat(1.0)).with_seed(4, 0);
    let full = simulate(&cfg).unwrap();
    let thin = simulate(&cfg.clone().with_save_every(2)).unwrap();
    let obs = Observable::builtins(0.5);
    let a = krylov_bogolyubov(&full, 20.0, &obs, &Binning::Count(10)).unwrap();
    let b = krylov_bogolyubov(&thin, 20.0, &obs, &Binning::Count(10)).unwrap();
    for (x, y) in a.histograms.iter().zip(&b.histograms) {
        assert!(tv_distance(&x.samples, &y.samples, 10) <= 0.05, "{}", x.name);
        assert!((x.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn same_start_different_noise_is_within_bootstrap_noise() {
    let grid = SpatialGrid::new(32).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 100.0, rd(PI * PI - 1.0, 0.3, 0.05)).with_seed(31, 0);
    let f = Field::zeros(grid, 0.0);
    let report = uniqueness_probe(&f, &f, &cfg, &Observable::builtins(0.5), 10.0).unwrap();
    assert!(report.within(2.0), "{:?}", report.distances);
}

#[test]
fn dissipative_coupling_contracts_on_most_paths() {
    let grid = SpatialGrid::new(32).unwrap();
    let f1 = Field::mode(grid, 1, 1.0);
    let f2 = Field::mode(grid, 2, -1.0).axpy(1.0, &Field::mode(grid, 3, 0.5));
    let cfg = SimConfig::new(grid, 1e-3, 2.0, rd(-1.0, 0.3, 0.05)).with_save_every(10);
    let contracting = (0..100u64)
        .into_par_iter()
        .filter(|j| {
            synchronous_coupling(&f1, &f2, &cfg.clone().with_seed(41, *j))
                .unwrap()
                .non_increasing_after(0.1, 0.0)
        })
        .count();
    assert!(contracting >= 95, "{contracting}/100");
}

#[test]
fn control_drift_is_uniformly_bounded() {
    let grid = SpatialGrid::new(32).unwrap();
    let kernel = GreenKernel::for_grid(&grid);
    let k = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spans = [0.1, 0.05, 0.02];
    let mut sups = Vec::new();
    for &span in &spans {
        let plan = SteeringPlan::new(Field::mode(grid, 1, 0.5), 1.0, 1.0, 1.0 - span, k).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let mut xi = Field::zeros(grid, 0.0);
            for n in 1..=8 {
                xi = xi.axpy(1.0, &Field::mode(grid, n, rng.random_range(-1.0..1.0)));
            }
            // anything from inside the ball to well outside 2K
            let xi = xi.scaled(rng.random_range(0.0..3.0) * k / xi.h_norm());
            let s = plan.t1 + rng.random::<f64>() * span;
            let d = control_drift(&xi, s, &plan, &kernel).unwrap();
            worst = worst.max(d.sup_abs());
            if xi.h_norm() >= 2.0 * k {
                assert!(d.values.iter().all(|v| *v == 0.0));
            }
        }
        assert!(worst.is_finite());
        sups.push(worst);
    }
    // sup |drift| ≤ C1 / (t - t1) + C2 with C1, C2 fitted on the two extremes
    let c1 = (sups[2] - sups[0]) / (1.0 / spans[2] - 1.0 / spans[0]);
    let c2 = sups[0] - c1 / spans[0];
    assert!(c1 > 0.0);
    assert!(sups[1] <= (c1 / spans[1] + c2) * 1.05, "{sups:?}");
}

#[test]
fn hit_fraction_grows_with_radius() {
    let grid = SpatialGrid::new(32).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 1.0, burgers(1.0)).with_truncation(10.0).with_seed(51, 0);
    let plan = SteeringPlan::with_pilot(Field::mode(grid, 1, 0.5), 1.0, 1.0, 0.95, &cfg, 20).unwrap();
    let res = steering_experiment(&plan, &cfg, 60).unwrap();
    let fr: Vec<f64> = [0.1, 0.3, 1.0].iter().map(|r| res.hit_fraction_at(*r)).collect();
    assert!(fr.windows(2).all(|w| w[0] <= w[1]), "{fr:?}");
    assert_eq!(res.hit_fraction_at(1.0), res.hit_fraction);
}

#[test]
fn additive_linear_case_is_reachable() {
    let grid = SpatialGrid::new(32).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 1.0, CoefficientSet::additive_heat(1.0)).with_truncation(50.0).with_seed(61, 0);
    let plan = SteeringPlan::new(Field::mode(grid, 1, 0.3), 1.0, 1.0, 0.99, 1.0).unwrap();
    let report = irreducibility_report(&plan, &cfg, &cfg.clone().without_truncation(), 200).unwrap();
    assert_eq!(report.status, ReachStatus::Positive, "{report:?}");
    assert!(report.lower_bound > 0.0);
}

#[test]
fn near_degenerate_noise_is_inconclusive() {
    let grid = SpatialGrid::new(32).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 1.0, burgers(1e-3)).with_truncation(10.0).with_seed(71, 0);
    let plan = SteeringPlan::new(Field::mode(grid, 1, 0.7), 1.0, 1.0, 0.99, 1.0).unwrap();
    let report = irreducibility_report(&plan, &cfg, &cfg.clone().without_truncation(), 100).unwrap();
    assert_eq!(report.status, ReachStatus::Inconclusive);
    assert_eq!(report.hits, 0);
}

#[test]
fn feller_difference_shrinks_linearly() {
    let grid = SpatialGrid::new(16).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 0.1, burgers(1.0)).with_truncation(10.0).with_seed(81, 0);
    let psi = Observable::tanh_mode(1, 1.0);
    let f1 = Field::zeros(grid, 0.0);
    let scales = [0.8, 0.4, 0.2];
    let diffs: Vec<f64> = scales
        .iter()
        .map(|&s| strong_feller_probe(&psi, &f1, &Field::mode(grid, 1, s), 0.1, &cfg, 40_000, 1.0).unwrap().difference)
        .collect();
    let slope = stats::ols_slope(&scales.map(f64::ln), &diffs.iter().map(|d| d.ln()).collect::<Vec<_>>());
    assert!((0.7..=1.3).contains(&slope), "{diffs:?} slope {slope}");
    let same = strong_feller_probe(&psi, &f1, &f1, 0.1, &cfg, 4000, 1.0).unwrap();
    assert!(same.difference <= 3.0 * same.std_err);
    assert_eq!(same.bound, 0.0);
}

#[test]
fn truncation_gap_decays_with_level() {
    let grid = SpatialGrid::new(16).unwrap();
    let cfg = SimConfig::new(grid, 1e-3, 0.5, burgers(25.0)).with_initial(Field::mode(grid, 1, 3.0)).with_seed(91, 0);
    let psi = Observable::tanh_mode(1, 1.0);
    let levels = [10.0, 100.0, 1000.0];
    let gaps = truncation_gap(&psi, &cfg.initial, 0.5, &cfg.clone().with_truncation(10.0), &levels, 500).unwrap();
    let g: Vec<f64> = gaps.iter().map(|e| e.value.abs()).collect();
    let se: Vec<f64> = gaps.iter().map(|e| e.std_err).collect();
    assert!(g[0] > 0.0, "truncation never binds: {g:?}");
    // non-increasing up to Monte Carlo error, and gone by the largest level
    assert!((0..2).all(|k| g[k + 1] <= g[k] + 2.0 * se[k].hypot(se[k + 1])), "{g:?} ± {se:?}");
    assert!(g[2] < g[0]);
    // smallest c with gap ≤ c / log R at every level stays of order the data
    let c = g.iter().zip(&levels).fold(0.0f64, |m, (gap, l)| m.max(gap * l.ln()));
    assert!(c.is_finite() && c <= 1.0, "c = {c}");
}
