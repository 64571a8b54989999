//! Incremental QR least-squares engine for the mixing step.
//!
//! The accelerator solves, at every iteration,
//!
//! ```text
//!     min_gamma || f_k - F_k gamma ||_2
//! ```
//!
//! where the columns of `F_k` are consecutive residual differences and a
//! parallel matrix `X_k` holds the matching iterate differences.  Columns
//! enter on the right as the iteration advances and leave on the left when
//! the window is full or the factorization becomes ill-conditioned, so the
//! factorization is maintained incrementally instead of being rebuilt:
//! appends extend Q and R by one column, drops restore triangularity with a
//! sweep of Givens rotations, and a full Householder refactorization runs
//! every [`DEFAULT_REFACTOR_PERIOD`] drops to stop rounding drift.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

/// Condition-number ceiling used when the problem does not override it.
pub const DEFAULT_COND_LIMIT: f64 = 1e12;

/// Number of rotation-based drops between full refactorizations.
pub const DEFAULT_REFACTOR_PERIOD: usize = 10;

/// Errors produced by the incremental least-squares engine.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QrError {
    /// An appended column contained NaN or infinite entries.
    #[error("non-finite entry in appended column")]
    NonFiniteInput,
    /// A solve was requested with no history columns present.
    #[error("history is empty")]
    EmptyHistory,
    /// The triangular factor is numerically singular; the caller should
    /// drop columns and retry.
    #[error("triangular factor is numerically singular")]
    DegenerateFactor,
}

/// Paired residual- and iterate-difference columns, oldest first.
#[derive(Debug, Clone)]
pub struct DifferenceBasis {
    f_cols: Vec<DVector<f64>>,
    x_cols: Vec<DVector<f64>>,
    dim: usize,
    capacity: usize,
}

impl DifferenceBasis {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            f_cols: Vec::with_capacity(capacity),
            x_cols: Vec::with_capacity(capacity),
            dim,
            capacity,
        }
    }

    /// Number of stored difference pairs.
    pub fn depth(&self) -> usize {
        self.f_cols.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Residual-difference columns, oldest first.
    pub fn f_columns(&self) -> &[DVector<f64>] {
        &self.f_cols
    }

    /// Iterate-difference columns, oldest first.
    pub fn x_columns(&self) -> &[DVector<f64>] {
        &self.x_cols
    }
}

/// Thin QR factors of the residual-difference matrix, kept in lockstep with
/// the basis by the append/drop operations.
#[derive(Debug, Clone)]
pub struct QrFactors {
    q_cols: Vec<DVector<f64>>,
    r: DMatrix<f64>,
    rotations_since_refactor: usize,
    refactor_period: usize,
}

impl QrFactors {
    fn new(refactor_period: usize) -> Self {
        Self {
            q_cols: Vec::new(),
            r: DMatrix::zeros(0, 0),
            rotations_since_refactor: 0,
            refactor_period,
        }
    }

    /// Orthonormal columns spanning the residual differences.
    pub fn q_columns(&self) -> &[DVector<f64>] {
        &self.q_cols
    }

    /// Upper-triangular factor (depth x depth).
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Drops performed since the last full refactorization.
    pub fn rotations_since_refactor(&self) -> usize {
        self.rotations_since_refactor
    }
}

/// Difference history plus its QR factorization: the state behind one
/// accelerated solve.
///
/// All operations are deterministic; an identical operation sequence yields
/// bit-identical factors.
#[derive(Debug, Clone)]
pub struct MixingState {
    pub basis: DifferenceBasis,
    pub qr: QrFactors,
    cond_limit: f64,
}

/// Relative threshold below which an appended column is treated as
/// numerically dependent and the factorization is rebuilt densely.
const DEPENDENT_COLUMN_RTOL: f64 = 1e-12;

impl MixingState {
    pub fn new(dim: usize, capacity: usize, cond_limit: f64) -> Self {
        Self {
            basis: DifferenceBasis::new(dim, capacity),
            qr: QrFactors::new(DEFAULT_REFACTOR_PERIOD),
            cond_limit,
        }
    }

    pub fn depth(&self) -> usize {
        self.basis.depth()
    }

    pub fn is_full(&self) -> bool {
        self.basis.depth() == self.basis.capacity
    }

    pub fn cond_limit(&self) -> f64 {
        self.cond_limit
    }

    /// Removes all history and factors.
    pub fn clear(&mut self) {
        self.basis.f_cols.clear();
        self.basis.x_cols.clear();
        self.qr.q_cols.clear();
        self.qr.r = DMatrix::zeros(0, 0);
    }

    /// Appends one difference pair on the right and extends Q and R.
    ///
    /// Uses classical Gram-Schmidt with one reorthogonalization pass; if the
    /// new column is numerically dependent on the span the whole
    /// factorization is rebuilt densely instead, which keeps Q orthonormal
    /// even for rank-deficient histories.  The history must not be full; the
    /// driver drops the oldest pair first.
    pub fn append(&mut self, f_diff: DVector<f64>, x_diff: DVector<f64>) -> Result<(), QrError> {
        assert!(
            self.basis.depth() < self.basis.capacity,
            "append on a full history; drop the oldest column first"
        );
        assert_eq!(f_diff.len(), self.basis.dim);
        assert_eq!(x_diff.len(), self.basis.dim);
        if !(f_diff.iter().all(|v| v.is_finite()) && x_diff.iter().all(|v| v.is_finite())) {
            return Err(QrError::NonFiniteInput);
        }

        let depth = self.basis.depth();
        let norm_in = f_diff.norm();
        let mut v = f_diff.clone();
        let mut r_col = DVector::zeros(depth + 1);
        for _ in 0..2 {
            for (j, q) in self.qr.q_cols.iter().enumerate() {
                let s = q.dot(&v);
                r_col[j] += s;
                v.axpy(-s, q, 1.0);
            }
        }
        let rho = v.norm();

        self.basis.f_cols.push(f_diff);
        self.basis.x_cols.push(x_diff);

        if rho <= DEPENDENT_COLUMN_RTOL * norm_in || !rho.is_finite() {
            self.refactor();
        } else {
            r_col[depth] = rho;
            self.qr.q_cols.push(v / rho);
            let mut r = DMatrix::zeros(depth + 1, depth + 1);
            r.view_mut((0, 0), (depth, depth)).copy_from(&self.qr.r);
            r.set_column(depth, &r_col);
            self.qr.r = r;
        }
        Ok(())
    }

    /// Removes the oldest difference pair and restores triangularity.
    ///
    /// Deleting the leftmost column of R leaves an upper-Hessenberg matrix;
    /// one sweep of Givens rotations re-triangularizes it and the same
    /// rotations are accumulated into Q.  Every [`DEFAULT_REFACTOR_PERIOD`]
    /// drops the factors are rebuilt from the stored columns.
    pub fn drop_oldest(&mut self) {
        let depth = self.basis.depth();
        if depth == 0 {
            return;
        }
        self.basis.f_cols.remove(0);
        self.basis.x_cols.remove(0);

        if depth == 1 {
            self.qr.q_cols.clear();
            self.qr.r = DMatrix::zeros(0, 0);
        } else {
            let mut r = self.qr.r.clone().remove_column(0);
            for j in 0..depth - 1 {
                let (c, s) = givens(r[(j, j)], r[(j + 1, j)]);
                rotate_rows(&mut r, j, c, s);
                rotate_q_pair(&mut self.qr.q_cols, j, c, s);
            }
            self.qr.r = r.remove_row(depth - 1);
            self.qr.q_cols.pop();
        }

        self.qr.rotations_since_refactor += 1;
        if self.qr.rotations_since_refactor >= self.qr.refactor_period {
            self.refactor();
        }
    }

    /// Rebuilds Q and R densely from the stored columns and resets the
    /// rotation counter.
    pub fn refactor(&mut self) {
        self.qr.rotations_since_refactor = 0;
        let depth = self.basis.depth();
        if depth == 0 {
            self.qr.q_cols.clear();
            self.qr.r = DMatrix::zeros(0, 0);
            return;
        }
        let f = DMatrix::from_columns(&self.basis.f_cols);
        let qr = f.qr();
        let q = qr.q();
        self.qr.r = qr.r();
        self.qr.q_cols = (0..depth).map(|j| DVector::from(q.column(j).into_owned())).collect();
    }

    /// Estimated 2-norm condition number of R.
    ///
    /// The cheap estimate is the ratio of extreme diagonal magnitudes, which
    /// lower-bounds the true condition number; when it exceeds a tenth of
    /// the configured limit the estimate is refined with a dense SVD of the
    /// small triangular factor.
    pub fn cond_estimate(&self) -> f64 {
        let depth = self.basis.depth();
        if depth == 0 {
            return 1.0;
        }
        let mut dmax = 0.0f64;
        let mut dmin = f64::INFINITY;
        for j in 0..depth {
            let d = self.qr.r[(j, j)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin == 0.0 || !dmax.is_finite() {
            return f64::INFINITY;
        }
        let cheap = dmax / dmin;
        if cheap <= 0.1 * self.cond_limit {
            return cheap;
        }
        let sv = self.qr.r.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin <= 0.0 {
            f64::INFINITY
        } else {
            smax / smin
        }
    }

    /// Drops oldest columns until the condition estimate is at or below the
    /// limit or a single column remains.  Returns the number dropped.
    pub fn prune_to_condition(&mut self) -> usize {
        let mut dropped = 0;
        while self.basis.depth() > 1 && self.cond_estimate() > self.cond_limit {
            self.drop_oldest();
            dropped += 1;
        }
        dropped
    }

    /// Least-squares coefficients of `f_k` against the residual differences.
    pub fn gamma(&self, f_k: &DVector<f64>) -> Result<DVector<f64>, QrError> {
        let depth = self.basis.depth();
        if depth == 0 {
            return Err(QrError::EmptyHistory);
        }
        let mut rhs = DVector::zeros(depth);
        for (j, q) in self.qr.q_cols.iter().enumerate() {
            rhs[j] = q.dot(f_k);
        }
        // Back-substitution on the triangular factor.
        let r = &self.qr.r;
        let mut gamma = rhs;
        for j in (0..depth).rev() {
            let mut s = gamma[j];
            for l in j + 1..depth {
                s -= r[(j, l)] * gamma[l];
            }
            gamma[j] = s / r[(j, j)];
        }
        if gamma.iter().all(|v| v.is_finite()) {
            Ok(gamma)
        } else {
            Err(QrError::DegenerateFactor)
        }
    }

    /// Equivalent convex-combination weights over the underlying iterate
    /// history (oldest first, `depth + 1` entries summing to one).  Debug
    /// accessor used by cross-checks.
    pub fn alpha_weights(&self, f_k: &DVector<f64>) -> Result<DVector<f64>, QrError> {
        let gamma = self.gamma(f_k)?;
        let depth = gamma.len();
        let mut alpha = DVector::zeros(depth + 1);
        alpha[0] = gamma[0];
        for i in 1..depth {
            alpha[i] = gamma[i] - gamma[i - 1];
        }
        alpha[depth] = 1.0 - gamma[depth - 1];
        Ok(alpha)
    }

    /// Computes the mixed pair for the current iterate.
    ///
    /// ```text
    ///     x_bar = x_k - X gamma
    ///     y_bar = g_k - (X + F) gamma
    /// ```
    ///
    /// With no history this degenerates to `(x_k, g_k)`, i.e. a plain
    /// fixed-point step.
    pub fn solve_mixing(
        &self,
        f_k: &DVector<f64>,
        x_k: &DVector<f64>,
        g_k: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>), QrError> {
        if self.basis.depth() == 0 {
            return Ok((x_k.clone(), g_k.clone()));
        }
        let gamma = self.gamma(f_k)?;
        let mut x_bar = x_k.clone();
        let mut y_bar = g_k.clone();
        for (j, g) in gamma.iter().enumerate() {
            x_bar.axpy(-g, &self.basis.x_cols[j], 1.0);
            y_bar.axpy(-g, &self.basis.x_cols[j], 1.0);
            y_bar.axpy(-g, &self.basis.f_cols[j], 1.0);
        }
        Ok((x_bar, y_bar))
    }

    /// Writes F, Q and R as labeled matrix-text blocks: a `name rows cols`
    /// header followed by one space-separated row per line, full precision.
    pub fn dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let depth = self.basis.depth();
        let dim = self.basis.dim;
        let write_cols = |w: &mut W, name: &str, cols: &[DVector<f64>]| -> io::Result<()> {
            writeln!(w, "{} {} {}", name, dim, cols.len())?;
            for i in 0..dim {
                let row: Vec<String> = cols.iter().map(|c| format!("{}", c[i])).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
            Ok(())
        };
        write_cols(w, "F", &self.basis.f_cols)?;
        write_cols(w, "Q", &self.qr.q_cols)?;
        writeln!(w, "R {} {}", depth, depth)?;
        for i in 0..depth {
            let row: Vec<String> = (0..depth).map(|j| format!("{}", self.qr.r[(i, j)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (a / r, b / r)
    }
}

/// Applies the rotation to rows `j` and `j + 1` of R.
fn rotate_rows(r: &mut DMatrix<f64>, j: usize, c: f64, s: f64) {
    for col in 0..r.ncols() {
        let a = r[(j, col)];
        let b = r[(j + 1, col)];
        r[(j, col)] = c * a + s * b;
        r[(j + 1, col)] = -s * a + c * b;
    }
}

/// Applies the transposed rotation to columns `j` and `j + 1` of Q so that
/// the product Q R is preserved.
fn rotate_q_pair(q_cols: &mut [DVector<f64>], j: usize, c: f64, s: f64) {
    let (head, tail) = q_cols.split_at_mut(j + 1);
    let qa = &mut head[j];
    let qb = &mut tail[0];
    for i in 0..qa.len() {
        let a = qa[i];
        let b = qb[i];
        qa[i] = c * a + s * b;
        qb[i] = -s * a + c * b;
    }
}
