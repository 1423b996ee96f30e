use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::grid_noise::SpatialGrid;
use crate::heat_kernel::{apply_j, fit_j_bound_constant, j_bound_integral, lp_norm, GreenKernel, KernelKind, SineBasis};
use crate::solver::Field;

/// One row of the kernel self-test.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    pub identity: &'static str,
    pub parameters: String,
    pub max_error: f64,
    pub tolerance: f64,
}

impl KernelCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

fn trapezoid(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let inner: f64 = (1..m).map(|k| f(k as f64 * h)).sum();
    h * (inner + 0.5 * (f(0.0) + f(1.0)))
}

/// Random piecewise-constant series on `[0, t)`, a few of them spiky.
pub fn random_series(grid: SpatialGrid, t: f64, rng: &mut ChaCha8Rng) -> Vec<Field> {
    let pieces = rng.random_range(1..=8);
    let mut times: Vec<f64> = (1..pieces).map(|_| rng.random::<f64>() * t).collect();
    times.push(0.0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|s| {
            let spike = rng.random::<f64>() < 0.3;
            let center = rng.random_range(0..grid.n_interior());
            let values = (0..grid.n_interior())
                .map(|i| {
                    if spike {
                        if i == center {
                            1.0 / grid.dx()
                        } else {
                            0.0
                        }
                    } else {
                        rng.sample::<f64, _>(StandardNormal)
                    }
                })
                .collect();
            Field::from_values(grid, s, values)
        })
        .collect()
}

/// Semigroup and heat identities, discrete orthonormality and the `L¹ → L²`
/// bound of `J` for both kernel kinds.
pub fn kernel_self_test(n_modes: usize, seed: u64) -> Result<Vec<KernelCheck>> {
    let kernel = GreenKernel::new(n_modes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();

    let times = [0.01, 0.05, 0.2];
    let mut worst = 0.0f64;
    for &t in &times {
        for &s in &times {
            for _ in 0..20 {
                let x: f64 = rng.random();
                let z: f64 = rng.random();
                let lhs = trapezoid(|y| kernel.eval_green(t, x, y).unwrap_or(0.0) * kernel.eval_green(s, y, z).unwrap_or(0.0), 8 * n_modes);
                worst = worst.max((lhs - kernel.eval_green(t + s, x, z)?).abs());
            }
        }
    }
    rows.push(KernelCheck {
        identity: "semigroup",
        parameters: format!("N={n_modes} t;s in {{0.01 0.05 0.2}} 20 pairs"),
        max_error: worst,
        tolerance: 1e-6,
    });

    let h = 1e-5;
    let mut worst = 0.0f64;
    for &t in &[0.05, 0.1, 0.2] {
        let mut scale = 0.0f64;
        let mut err = 0.0f64;
        for _ in 0..20 {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let fd = (kernel.eval_green(t + h, x, y)? - kernel.eval_green(t - h, x, y)?) / (2.0 * h);
            let spectral = kernel.eval_green_dt(t, x, y)?;
            scale = scale.max(spectral.abs());
            err = err.max((fd - spectral).abs());
        }
        worst = worst.max(err / scale);
    }
    rows.push(KernelCheck {
        identity: "heat_equation",
        parameters: format!("N={n_modes} t in {{0.05 0.1 0.2}} h=1e-5"),
        max_error: worst,
        tolerance: 1e-4,
    });

    let grid = SpatialGrid::new(2 * n_modes)?;
    let basis = SineBasis::new(grid, &kernel)?;
    let mut worst = 0.0f64;
    for m in 1..=n_modes {
        let em = Field::mode(grid, m, 1.0);
        let c = basis.project(&em.values);
        for (n, cn) in c.iter().enumerate() {
            let target = if n + 1 == m { 1.0 } else { 0.0 };
            worst = worst.max((cn - target).abs());
        }
    }
    rows.push(KernelCheck {
        identity: "orthonormality",
        parameters: format!("n_cells={} N={n_modes}", grid.n_cells()),
        max_error: worst,
        tolerance: 1e-8,
    });

    let horizon = 1.0;
    for (kind, name) in [(KernelKind::Gauss, "j_bound_gauss"), (KernelKind::GaussDy, "j_bound_gauss_dy")] {
        let c1 = fit_j_bound_constant(grid, &kernel, kind, horizon)?;
        let mut worst_ratio = 0.0f64;
        for _ in 0..100 {
            let t = 0.01 + 0.99 * rng.random::<f64>();
            let v = random_series(grid, t, &mut rng);
            let lhs = lp_norm(&apply_j(&v, kind, t, &kernel)?.values, grid.dx(), 2.0);
            let rhs = c1 * j_bound_integral(&v, t, 1.0, 2.0)?;
            if rhs > 0.0 {
                worst_ratio = worst_ratio.max(lhs / rhs);
            }
        }
        rows.push(KernelCheck {
            identity: name,
            parameters: format!("q=1 rho=2 C1={c1:.6e} 100 inputs; error = max ratio to bound"),
            max_error: worst_ratio,
            tolerance: 1.0,
        });
    }
    Ok(rows)
}
