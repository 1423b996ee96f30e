use std::fmt;
use std::sync::Arc;

use crate::heat_kernel::eigenfunction;
use crate::solver::Field;

type Functional = Arc<dyn Fn(&Field) -> f64 + Send + Sync>;

/// A named scalar functional of the state.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    functional: Functional,
    /// `sup |ψ|` when the functional is globally bounded
    pub sup_bound: Option<f64>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl Observable {
    pub fn new(name: &str, sup_bound: Option<f64>, f: impl Fn(&Field) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            functional: Arc::new(f),
            sup_bound,
        }
    }

    #[inline]
    pub fn eval(&self, u: &Field) -> f64 {
        (self.functional)(u)
    }

    pub fn h_norm_sq() -> Self {
        Self::new("h_norm_sq", None, Field::h_norm_sq)
    }

    /// `⟨u, e_n⟩_H`
    pub fn mode(n: usize) -> Self {
        let name = if n == 1 { "mode_1".to_string() } else { format!("mode_{n}") };
        Self {
            name,
            functional: Arc::new(move |u: &Field| mode_coefficient(u, n)),
            sup_bound: None,
        }
    }

    pub fn mode_1() -> Self {
        Self::mode(1)
    }

    /// `u(x₀)` at the nearest interior node.
    pub fn point(x0: f64) -> Self {
        Self::new("point", None, move |u| u.values[u.grid.nearest_node(x0)])
    }

    pub fn sup_abs() -> Self {
        Self::new("sup_abs", None, Field::sup_abs)
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", Some(c.abs()), move |_| c)
    }

    /// `tanh(⟨u, e_n⟩ / ε)`, a bounded smooth functional of one mode.
    pub fn tanh_mode(n: usize, eps: f64) -> Self {
        Self {
            name: format!("tanh_mode_{n}"),
            functional: Arc::new(move |u: &Field| (mode_coefficient(u, n) / eps).tanh()),
            sup_bound: Some(1.0),
        }
    }

    /// The four built-ins, in the column order used by trajectory output.
    pub fn builtins(x0: f64) -> Vec<Observable> {
        vec![Self::h_norm_sq(), Self::mode_1(), Self::point(x0), Self::sup_abs()]
    }
}

fn mode_coefficient(u: &Field, n: usize) -> f64 {
    let g = u.grid;
    g.dx() * u.values.iter().enumerate().map(|(i, v)| v * eigenfunction(n, g.x(i))).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_noise::SpatialGrid;

    #[test]
    fn builtins_on_a_mode() {
        let grid = SpatialGrid::new(64).unwrap();
        let f = Field::mode(grid, 1, 0.5);
        let obs = Observable::builtins(0.5);
        assert!((obs[0].eval(&f) - 0.25).abs() < 1e-12);
        assert!((obs[1].eval(&f) - 0.5).abs() < 1e-12);
        assert!((obs[2].eval(&f) - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!((obs[3].eval(&f) - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!(Observable::mode(2).eval(&f).abs() < 1e-12);
    }

    #[test]
    fn tanh_mode_is_bounded() {
        let grid = SpatialGrid::new(16).unwrap();
        let psi = Observable::tanh_mode(1, 0.01);
        assert_eq!(psi.sup_bound, Some(1.0));
        assert!(psi.eval(&Field::mode(grid, 1, 100.0)) <= 1.0);
    }
}
