//! Genotype-mixture EM problem.
//!
//! `n_ind` diploid individuals are typed at `j` biallelic markers; each
//! individual draws its two allele copies from `k` source populations with
//! individual-specific proportions `q_i` (rows of a stochastic matrix) and
//! population allele frequencies `f_k`.  The counted-allele probability at
//! marker `jj` for individual `i` is `p_ij = sum_k q_ik f_k,jj` and the
//! genotype `X_ij` in {0, 1, 2} is binomial with two trials.
//!
//! The log-likelihood is
//!
//! ```text
//!     L(F, Q) = sum_ij  X_ij log(sum_k q_ik f_kj)
//!             + (2 - X_ij) log(sum_k q_ik (1 - f_kj))
//! ```
//!
//! and the fixed-point map is one EM sweep expressed over unconstrained
//! parameters: frequencies enter through a logistic transform and each
//! proportion row through a softmax, so the accelerator mixes points of a
//! flat vector space.  The likelihood doubles as the objective used by the
//! step guard.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Dirichlet, Distribution};

use crate::accel::Mapping;

/// Probabilities are kept inside `[PROB_EPS, 1 - PROB_EPS]` wherever a
/// logarithm or quotient could degenerate.
pub const PROB_EPS: f64 = 1e-12;

/// Condition ceiling for mixing histories of EM maps.
pub const EM_COND_LIMIT: f64 = 1e5;

#[derive(Debug, Clone)]
pub struct AdmixtureProblem {
    k: usize,
    j: usize,
    n_ind: usize,
    /// Genotypes in {0, 1, 2}, row-major `n_ind x j`.
    x: Vec<u8>,
}

/// A generated problem instance with its starting parameters and the ground
/// truth it was sampled from.
#[derive(Debug, Clone)]
pub struct AdmixtureInstance {
    pub problem: AdmixtureProblem,
    pub start: DVector<f64>,
    pub truth_f: DMatrix<f64>,
    pub truth_q: DMatrix<f64>,
}

/// Samples ground truth, genotypes and a starting point.
///
/// Frequencies are uniform on (0.05, 0.95), proportion rows are flat
/// Dirichlet, genotypes binomial, and the starting parameters uniform on
/// (-0.5, 0.5).  Everything is a pure function of the seed.
pub fn generate(k: usize, j: usize, n_ind: usize, seed: u64) -> AdmixtureInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth_f = DMatrix::zeros(k, j);
    for kk in 0..k {
        for jj in 0..j {
            truth_f[(kk, jj)] = rng.gen_range(0.05..0.95);
        }
    }
    let mut truth_q = DMatrix::zeros(n_ind, k);
    if k == 1 {
        truth_q.fill(1.0);
    } else {
        let dir = Dirichlet::new_with_size(1.0, k).expect("flat Dirichlet");
        for i in 0..n_ind {
            let row = dir.sample(&mut rng);
            for kk in 0..k {
                truth_q[(i, kk)] = row[kk];
            }
        }
    }
    let x = sample_genotypes(&truth_f, &truth_q, &mut rng);
    let problem = AdmixtureProblem::new(k, j, n_ind, x);
    let start = DVector::from_fn(problem.dim(), |_, _| rng.gen_range(-0.5..0.5));
    AdmixtureInstance { problem, start, truth_f, truth_q }
}

fn sample_genotypes(truth_f: &DMatrix<f64>, truth_q: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let k = truth_f.nrows();
    let j = truth_f.ncols();
    let n_ind = truth_q.nrows();
    let mut x = Vec::with_capacity(n_ind * j);
    for i in 0..n_ind {
        for jj in 0..j {
            let mut p = 0.0;
            for kk in 0..k {
                p += truth_q[(i, kk)] * truth_f[(kk, jj)];
            }
            let bin = Binomial::new(2, p.clamp(0.0, 1.0)).expect("probability in range");
            x.push(bin.sample(rng) as u8);
        }
    }
    x
}

impl AdmixtureProblem {
    pub fn new(k: usize, j: usize, n_ind: usize, x: Vec<u8>) -> Self {
        assert_eq!(x.len(), n_ind * j);
        assert!(x.iter().all(|g| *g <= 2));
        assert!(k >= 1 && j >= 1 && n_ind >= 1);
        Self { k, j, n_ind, x }
    }

    /// (populations, markers, individuals).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.k, self.j, self.n_ind)
    }

    pub fn genotype(&self, i: usize, jj: usize) -> u8 {
        self.x[i * self.j + jj]
    }

    /// Unpacks the parameter vector into frequencies (`k x j`, logistic)
    /// and proportions (`n_ind x k`, row softmax).
    pub fn decode(&self, params: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        assert_eq!(params.len(), self.dim());
        let mut f = DMatrix::zeros(self.k, self.j);
        for kk in 0..self.k {
            for jj in 0..self.j {
                let u = params[kk * self.j + jj];
                f[(kk, jj)] = 1.0 / (1.0 + (-u).exp());
            }
        }
        let base = self.k * self.j;
        let mut q = DMatrix::zeros(self.n_ind, self.k);
        for i in 0..self.n_ind {
            let row = &params.as_slice()[base + i * self.k..base + (i + 1) * self.k];
            let vmax = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for kk in 0..self.k {
                let e = (row[kk] - vmax).exp();
                q[(i, kk)] = e;
                sum += e;
            }
            for kk in 0..self.k {
                q[(i, kk)] /= sum;
            }
        }
        (f, q)
    }

    /// Packs frequencies and proportions back into a parameter vector,
    /// clamping away exact zeros and ones first.  Proportion rows land in
    /// the canonical gauge `v = log q`.
    pub fn encode(&self, f: &DMatrix<f64>, q: &DMatrix<f64>) -> DVector<f64> {
        let mut params = DVector::zeros(self.dim());
        for kk in 0..self.k {
            for jj in 0..self.j {
                let fc = f[(kk, jj)].clamp(PROB_EPS, 1.0 - PROB_EPS);
                params[kk * self.j + jj] = (fc / (1.0 - fc)).ln();
            }
        }
        let base = self.k * self.j;
        for i in 0..self.n_ind {
            for kk in 0..self.k {
                params[base + i * self.k + kk] = q[(i, kk)].max(PROB_EPS).ln();
            }
        }
        params
    }

    /// One EM sweep: responsibilities for both allele classes, then the
    /// closed-form maximizers.  Exact EM, so the likelihood never
    /// decreases along repeated sweeps.
    pub fn em_step(&self, f: &DMatrix<f64>, q: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (k, j, n) = (self.k, self.j, self.n_ind);
        let mut f_num = vec![0.0f64; k * j];
        let mut f_den = vec![0.0f64; k * j];
        let mut q_new = DMatrix::zeros(n, k);
        for i in 0..n {
            for jj in 0..j {
                let xij = f64::from(self.x[i * j + jj]);
                let mut pa = 0.0;
                let mut pb = 0.0;
                for kk in 0..k {
                    let qf = q[(i, kk)] * f[(kk, jj)];
                    pa += qf;
                    pb += q[(i, kk)] - qf;
                }
                pa = pa.max(PROB_EPS);
                pb = pb.max(PROB_EPS);
                for kk in 0..k {
                    let sa = xij * q[(i, kk)] * f[(kk, jj)] / pa;
                    let sb = (2.0 - xij) * q[(i, kk)] * (1.0 - f[(kk, jj)]) / pb;
                    f_num[kk * j + jj] += sa;
                    f_den[kk * j + jj] += sa + sb;
                    q_new[(i, kk)] += sa + sb;
                }
            }
        }
        let mut f_new = DMatrix::zeros(k, j);
        for kk in 0..k {
            for jj in 0..j {
                let den = f_den[kk * j + jj];
                f_new[(kk, jj)] = if den > 0.0 { f_num[kk * j + jj] / den } else { 0.0 };
            }
        }
        q_new /= 2.0 * j as f64;
        (f_new, q_new)
    }

    /// Log-likelihood of decoded parameters.
    ///
    /// Kahan-compensated accumulation: the guard and the monotonicity checks
    /// compare consecutive values to absolute slacks near 1e-10, and plain
    /// summation of the n*j terms carries rounding noise above that.
    pub fn loglik_fq(&self, f: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        let (k, j, n) = (self.k, self.j, self.n_ind);
        let mut ll = 0.0;
        let mut comp = 0.0;
        for i in 0..n {
            for jj in 0..j {
                let xij = f64::from(self.x[i * j + jj]);
                let mut pa = 0.0;
                for kk in 0..k {
                    pa += q[(i, kk)] * f[(kk, jj)];
                }
                let pa = pa.clamp(PROB_EPS, 1.0 - PROB_EPS);
                let pb = (1.0 - pa).clamp(PROB_EPS, 1.0 - PROB_EPS);
                let term = xij * pa.ln() + (2.0 - xij) * pb.ln();
                let y = term - comp;
                let t = ll + y;
                comp = (t - ll) - y;
                ll = t;
            }
        }
        ll
    }

    /// Log-likelihood of a packed parameter vector.
    pub fn loglik(&self, params: &DVector<f64>) -> f64 {
        let (f, q) = self.decode(params);
        self.loglik_fq(&f, &q)
    }

    /// Writes the genotype matrix as CSV, one row per individual.
    pub fn write_genotypes_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for i in 0..self.n_ind {
            let row: Vec<String> =
                (0..self.j).map(|jj| self.x[i * self.j + jj].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl Mapping for AdmixtureProblem {
    fn dim(&self) -> usize {
        self.k * self.j + self.n_ind * self.k
    }

    fn apply(&self, params: &DVector<f64>) -> DVector<f64> {
        let (f, q) = self.decode(params);
        let (f_new, q_new) = self.em_step(&f, &q);
        self.encode(&f_new, &q_new)
    }

    fn objective(&self, params: &DVector<f64>) -> Option<f64> {
        Some(self.loglik(params))
    }

    fn condition_limit(&self) -> f64 {
        EM_COND_LIMIT
    }
}
