//! Diagonal linear contraction used for controlled experiments.
//!
//! The map is `g(x) = x - (D x - b)` for a positive diagonal `D` with
//! entries in (0, 2), so the plain iteration contracts with factor
//! `max_i |1 - d_i|` and every aspect of the accelerated run can be checked
//! against closed forms.

use nalgebra::DVector;

use crate::accel::Mapping;

/// Fixed-point form of a diagonal linear system `D x = b`.
#[derive(Debug, Clone)]
pub struct LinearDiagProblem {
    diag: DVector<f64>,
    b: DVector<f64>,
}

impl LinearDiagProblem {
    pub fn new(diag: DVector<f64>, b: DVector<f64>) -> Self {
        assert_eq!(diag.len(), b.len());
        assert!(diag.iter().all(|d| *d > 0.0 && *d < 2.0), "diagonal must lie in (0, 2)");
        Self { diag, b }
    }

    /// The standard instance: eigenvalues evenly spaced as `2 i / (n + 1)`
    /// and a right-hand side of ones.  At `n = 19` the spectrum is 0.1,
    /// 0.2, ..., 1.9.
    pub fn ramp(n: usize) -> Self {
        let diag = DVector::from_fn(n, |i, _| 2.0 * (i + 1) as f64 / (n + 1) as f64);
        Self::new(diag, DVector::from_element(n, 1.0))
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    /// Exact fixed point `D^{-1} b`.
    pub fn solution(&self) -> DVector<f64> {
        DVector::from_fn(self.b.len(), |i, _| self.b[i] / self.diag[i])
    }

    /// Residual norm weighted by the inverse diagonal, `|| v ||_{D^{-1}}`.
    pub fn elliptic_norm(&self, v: &DVector<f64>) -> f64 {
        elliptic_norm(v, &self.diag)
    }
}

/// `sqrt( sum_i v_i^2 / d_i )` for a positive diagonal weight `d`.
pub fn elliptic_norm(v: &DVector<f64>, diag: &DVector<f64>) -> f64 {
    assert_eq!(v.len(), diag.len());
    v.iter().zip(diag.iter()).map(|(vi, di)| vi * vi / di).sum::<f64>().sqrt()
}

impl Mapping for LinearDiagProblem {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| x[i] - (self.diag[i] * x[i] - self.b[i]))
    }
}
