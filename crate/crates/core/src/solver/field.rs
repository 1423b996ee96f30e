use crate::grid_noise::SpatialGrid;
use crate::heat_kernel::eigenfunction;

/// Spatial profile `u(t, ·)` on the interior nodes; boundary values are
/// implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub t: f64,
    pub values: Vec<f64>,
    pub grid: SpatialGrid,
}

impl Field {
    pub fn zeros(grid: SpatialGrid, t: f64) -> Self {
        Self {
            t,
            values: vec![0.0; grid.n_interior()],
            grid,
        }
    }

    pub fn from_values(grid: SpatialGrid, t: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_interior());
        Self { t, values, grid }
    }

    pub fn from_fn(grid: SpatialGrid, t: f64, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t,
            values: grid.interior_nodes().map(f).collect(),
            grid,
        }
    }

    /// `amp · e_n` sampled on the grid.
    pub fn mode(grid: SpatialGrid, n: usize, amp: f64) -> Self {
        Self::from_fn(grid, 0.0, |x| amp * eigenfunction(n, x))
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// `|u|²_H = dx Σ_i u_i²`.
    pub fn h_norm_sq(&self) -> f64 {
        h_norm_sq(&self.values, self.grid.dx())
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.dx() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &Field) -> f64 {
        let dx = self.grid.dx();
        (dx * self.values.iter().zip(&other.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            values: self.values.iter().map(|v| a * v).collect(),
            ..self.clone()
        }
    }

    /// `self + a · other`
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        Field {
            values: self.values.iter().zip(&other.values).map(|(p, q)| p + a * q).collect(),
            ..self.clone()
        }
    }

    /// Profile including the two Dirichlet boundary zeros.
    pub fn full_profile(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 2);
        out.push(0.0);
        out.extend_from_slice(&self.values);
        out.push(0.0);
        out
    }
}

#[inline]
pub(crate) fn h_norm_sq(values: &[f64], dx: f64) -> f64 {
    dx * values.iter().map(|v| v * v).sum::<f64>()
}
