use proptest::prelude::*;

use spdelab::cli_io::{fmt_real, RunConfig};
use spdelab::coefficients::{ScalarCoef, TruncationGate};
use spdelab::ergolab::{equal_width_edges, histogram, tv_distance, wasserstein_1};
use spdelab::grid_noise::SpatialGrid;
use spdelab::heat_kernel::{apply_j, GreenKernel, KernelKind};
use spdelab::solver::Field;

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..60)
}

proptest! {
    #[test]
    fn w1_is_a_metric_on_samples(a in samples(), b in samples(), c in samples()) {
        let ab = wasserstein_1(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_1(&b, &a)).abs() <= 1e-9 * (1.0 + ab));
        prop_assert!(wasserstein_1(&a, &a) == 0.0);
        prop_assert!(ab <= wasserstein_1(&a, &c) + wasserstein_1(&c, &b) + 1e-9);
    }

    #[test]
    fn w1_of_a_shift_is_the_shift(a in samples(), s in -10.0f64..10.0) {
        let b: Vec<f64> = a.iter().map(|x| x + s).collect();
        prop_assert!((wasserstein_1(&a, &b) - s.abs()).abs() < 1e-9);
    }

    #[test]
    fn histogram_masses_sum_to_one(a in samples(), bins in 1usize..30) {
        let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let edges = equal_width_edges(lo, hi.max(lo + 1.0), bins);
        let m = histogram(&a, &edges);
        prop_assert_eq!(m.len(), bins);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let tv = tv_distance(&a, &a, bins);
        prop_assert_eq!(tv, 0.0);
    }

    #[test]
    fn gate_is_monotone_between_zero_and_one(level in 0.1f64..100.0, r1 in 0.0f64..200.0, r2 in 0.0f64..200.0) {
        let g = TruncationGate::new(level).unwrap();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!((0.0..=1.0).contains(&g.value(lo)));
        prop_assert!(g.value(hi) <= g.value(lo));
        prop_assert!(g.derivative(lo) <= 0.0);
    }

    #[test]
    fn polynomial_mollification_commutes_with_scaling(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c3 in -1.0f64..1.0, a in -2.0f64..2.0, n in 1usize..100, r in -5.0f64..5.0) {
        let p = ScalarCoef::Poly([c0, c1, 0.5, c3]).mollified(n);
        let q = ScalarCoef::Poly([a * c0, a * c1, a * 0.5, a * c3]).mollified(n);
        let (pv, qv) = (p.eval(0.0, 0.5, r), q.eval(0.0, 0.5, r));
        prop_assert!((a * pv - qv).abs() <= 1e-12 * (1.0 + qv.abs()));
    }

    #[test]
    fn reals_survive_text(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn apply_j_is_linear(seed_a in prop::collection::vec(-1.0f64..1.0, 15), seed_b in prop::collection::vec(-1.0f64..1.0, 15), alpha in -3.0f64..3.0, t in 0.01f64..1.0) {
        let grid = SpatialGrid::new(16).unwrap();
        let kernel = GreenKernel::for_grid(&grid);
        let va = vec![Field::from_values(grid, 0.0, seed_a.clone())];
        let vb = vec![Field::from_values(grid, 0.0, seed_b.clone())];
        let mix = vec![Field::from_values(grid, 0.0, seed_a.iter().zip(&seed_b).map(|(x, y)| alpha * x + y).collect())];
        for kind in [KernelKind::Gauss, KernelKind::GaussDy] {
            let ja = apply_j(&va, kind, t, &kernel).unwrap();
            let jb = apply_j(&vb, kind, t, &kernel).unwrap();
            let jm = apply_j(&mix, kind, t, &kernel).unwrap();
            let lin = ja.scaled(alpha).axpy(1.0, &jb);
            prop_assert!(jm.distance(&lin) <= 1e-12 * (1.0 + lin.h_norm()));
        }
    }

    #[test]
    fn h_norm_triangle_inequality(a in prop::collection::vec(-5.0f64..5.0, 31), b in prop::collection::vec(-5.0f64..5.0, 31)) {
        let grid = SpatialGrid::new(32).unwrap();
        let fa = Field::from_values(grid, 0.0, a);
        let fb = Field::from_values(grid, 0.0, b);
        prop_assert!(fa.axpy(1.0, &fb).h_norm() <= fa.h_norm() + fb.h_norm() + 1e-12);
        prop_assert!((fa.inner(&fb)).abs() <= fa.h_norm() * fb.h_norm() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolved_configs_round_trip(n_cells in 4usize..256, dt in 1e-6f64..1e-2, steps in 1usize..1000, seed in any::<u64>(), sigma in 0.01f64..5.0, amp in 0.0f64..0.9, r in prop::option::of(1.0f64..1e4)) {
        let mut text = format!(
            "[grid]\nn_cells = {n_cells}\n[time]\ndt = {dt:?}\nhorizon = {:?}\n[coefficients]\npreset = reaction_diffusion\nalpha = -1\nsigma = {sigma:?}\nsigma_amp = {:?}\n[noise]\nseed = {seed}\n",
            dt * steps as f64,
            amp * sigma
        );
        if let Some(r) = r {
            text.push_str(&format!("[truncation]\nR = {r:?}\n"));
        }
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.to_text(), again.to_text());
    }
}
