//! Nonlinear elliptic PDE test problem.
//!
//! Discretizes `Delta u + lambda e^u = 0` on the unit square with zero
//! Dirichlet boundary, five-point stencil, `grid_n` interior points per
//! side and spacing `h = 1 / (grid_n + 1)`.  With `A` the (negative)
//! discrete Laplacian the fixed-point map is the diagonally preconditioned
//! update
//!
//! ```text
//!     g(x)_i = x_i + (b_i - (A x)_i + lambda e^{x_i}) / A_ii ,   b = 0,
//! ```
//!
//! a simultaneous Jacobi-style sweep whose fixed points solve
//! `A x = lambda e^x`.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::accel::Mapping;

#[derive(Debug, Clone)]
pub struct BratuProblem {
    grid_n: usize,
    lambda: f64,
    inv_h2: f64,
}

impl BratuProblem {
    pub fn new(grid_n: usize, lambda: f64) -> Self {
        assert!(grid_n >= 1);
        let h = 1.0 / (grid_n + 1) as f64;
        Self { grid_n, lambda, inv_h2: 1.0 / (h * h) }
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Uniform random field on (0, 1), the benchmark's per-draw start.
    pub fn uniform_start(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(self.grid_n * self.grid_n, |_, _| rng.gen_range(0.0..1.0))
    }

    /// Matrix-free application of the negative discrete Laplacian.
    pub fn laplacian_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.grid_n;
        let at = |r: isize, c: isize| -> f64 {
            if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                0.0
            } else {
                x[r as usize * n + c as usize]
            }
        };
        DVector::from_fn(n * n, |idx, _| {
            let r = (idx / n) as isize;
            let c = (idx % n) as isize;
            self.inv_h2 * (4.0 * at(r, c) - at(r - 1, c) - at(r + 1, c) - at(r, c - 1) - at(r, c + 1))
        })
    }
}

impl Mapping for BratuProblem {
    fn dim(&self) -> usize {
        self.grid_n * self.grid_n
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let ax = self.laplacian_apply(x);
        let diag = 4.0 * self.inv_h2;
        DVector::from_fn(self.dim(), |i, _| {
            x[i] + (-ax[i] + self.lambda * x[i].exp()) / diag
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{solve, SolveOptions};
    use crate::relax::Relaxation;
    use nalgebra::DMatrix;

    #[test]
    fn single_point_grid_without_forcing_maps_to_zero() {
        let p = BratuProblem::new(1, 0.0);
        for c in [-2.0, 0.0, 3.5] {
            let x = DVector::from_element(1, c);
            assert_eq!(p.apply(&x)[0], 0.0);
        }
    }

    #[test]
    fn map_residual_matches_dense_operator_on_small_grid() {
        let n = 5;
        let p = BratuProblem::new(n, 6.0);
        let dim = n * n;
        let inv_h2 = ((n + 1) * (n + 1)) as f64;
        let mut a = DMatrix::zeros(dim, dim);
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                a[(i, i)] = 4.0 * inv_h2;
                let mut link = |rr: isize, cc: isize| {
                    if rr >= 0 && cc >= 0 && (rr as usize) < n && (cc as usize) < n {
                        a[(i, rr as usize * n + cc as usize)] = -inv_h2;
                    }
                };
                link(r as isize - 1, c as isize);
                link(r as isize + 1, c as isize);
                link(r as isize, c as isize - 1);
                link(r as isize, c as isize + 1);
            }
        }
        let x = p.uniform_start(3);
        let got = p.apply(&x) - &x;
        let ax = &a * &x;
        for i in 0..dim {
            let want = (p.lambda() * x[i].exp() - ax[i]) / a[(i, i)];
            assert!((got[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn accelerated_solve_finds_a_positive_bump() {
        let p = BratuProblem::new(10, 6.0);
        let opts = SolveOptions { m: 8, tol: 1e-8, ..Default::default() };
        let report = solve(&p, &DVector::zeros(p.dim()), Relaxation::Md, &opts).unwrap();
        assert!(report.converged);
        // The solution of the nonlinear problem is a positive interior bump.
        let x = {
            let mut x = DVector::zeros(p.dim());
            for _ in 0..report.iterations + 50 {
                x = p.apply(&x);
            }
            x
        };
        assert!(x.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn uniform_start_is_seed_deterministic() {
        let p = BratuProblem::new(6, 6.0);
        assert_eq!(p.uniform_start(9), p.uniform_start(9));
        assert_ne!(p.uniform_start(9), p.uniform_start(10));
    }
}
