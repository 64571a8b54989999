//! Shared oracles for the integration tests: a dense constrained
//! least-squares reference for the mixing step and a random symmetric
//! contraction family.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Dense reference for the mixed pair, solved as an equality-constrained
/// least-squares problem over weights on the raw snapshots:
///
/// ```text
///     min_alpha || sum_i alpha_i f_i ||^2   s.t.  sum_i alpha_i = 1
/// ```
///
/// by the nullspace method: `alpha = alpha0 + Z w` with `alpha0` the uniform
/// feasible point and `Z` an orthonormal basis of the zero-sum subspace
/// (columns 1.. of the Householder reflector sending the ones vector to a
/// coordinate axis), then a dense SVD solve of `(F Z) w = -F alpha0`.  This
/// conditions like the difference matrix rather than its square, and is
/// completely independent of the incremental QR path.  Finally
/// `x_bar = sum alpha_i x_i`, `y_bar = sum alpha_i (x_i + f_i)`.
pub fn dense_mixing_oracle(
    x_snaps: &[DVector<f64>],
    f_snaps: &[DVector<f64>],
) -> (DVector<f64>, DVector<f64>) {
    let s = x_snaps.len();
    assert_eq!(s, f_snaps.len());
    assert!(s >= 1);
    if s == 1 {
        return (x_snaps[0].clone(), &x_snaps[0] + &f_snaps[0]);
    }

    let mut v = DVector::from_element(s, 1.0);
    v[0] += (s as f64).sqrt();
    let h = DMatrix::identity(s, s) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    let z = h.columns(1, s - 1).into_owned();

    let f = DMatrix::from_columns(f_snaps);
    let alpha0 = DVector::from_element(s, 1.0 / s as f64);
    let rhs = -(&f * &alpha0);
    let fz = &f * &z;
    let w = fz.svd(true, true).solve(&rhs, 0.0).expect("full-rank window");
    let alpha = alpha0 + &z * w;

    let dim = x_snaps[0].len();
    let mut x_bar = DVector::zeros(dim);
    let mut y_bar = DVector::zeros(dim);
    for a in 0..s {
        x_bar.axpy(alpha[a], &x_snaps[a], 1.0);
        y_bar.axpy(alpha[a], &(&x_snaps[a] + &f_snaps[a]), 1.0);
    }
    (x_bar, y_bar)
}

/// Random symmetric positive-definite operator A = Q diag(lam) Q^T with a
/// known eigenbasis, for contraction mappings g(x) = x - (Ax - b).
pub struct RandomSym {
    q: DMatrix<f64>,
    pub lam: DVector<f64>,
}

impl RandomSym {
    /// Eigenvalues uniform in (lo, hi); Q from the QR factorization of a
    /// Gaussian matrix.
    pub fn sample<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Self {
        let gauss = DMatrix::from_fn(n, n, |_, _| {
            // Box-Muller keeps the dev-dependency surface small.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let q = gauss.qr().q();
        let lam = DVector::from_fn(n, |_, _| rng.gen_range(lo..hi));
        Self { q, lam }
    }

    /// A v.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let w = self.q.transpose() * v;
        let scaled = DVector::from_fn(w.len(), |i, _| self.lam[i] * w[i]);
        &self.q * scaled
    }

    /// || v ||_{A^{-1}} = || diag(lam)^{-1/2} Q^T v ||.
    pub fn inv_norm(&self, v: &DVector<f64>) -> f64 {
        let w = self.q.transpose() * v;
        (0..w.len()).map(|i| w[i] * w[i] / self.lam[i]).sum::<f64>().sqrt()
    }
}
