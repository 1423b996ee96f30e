/// Pre-factored solver for the constant tridiagonal system `(I - dt A_h) x = rhs`,
/// with `A_h` the Dirichlet second difference.
#[derive(Debug, Clone)]
pub struct ImplicitDiffusion {
    off: f64,
    /// modified super-diagonal of the Thomas sweep
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl ImplicitDiffusion {
    pub fn new(n: usize, dt: f64, dx: f64) -> Self {
        let r = dt / (dx * dx);
        let diag = 1.0 + 2.0 * r;
        let off = -r;
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let denom = diag - off * prev_c;
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = off / denom;
            prev_c = c_prime[i];
        }
        Self { off, c_prime, inv_denom }
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut prev = 0.0;
        for i in 0..n {
            rhs[i] = (rhs[i] - self.off * prev) * self.inv_denom[i];
            prev = rhs[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_explicit_matrix() {
        let n = 9;
        let (dt, dx) = (0.01, 0.1);
        let solver = ImplicitDiffusion::new(n, dt, dx);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x = rhs.clone();
        solver.solve(&mut x);
        let r = dt / (dx * dx);
        for i in 0..n {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            let ax = (1.0 + 2.0 * r) * x[i] - r * (left + right);
            assert!((ax - rhs[i]).abs() < 1e-12);
        }
    }
}
