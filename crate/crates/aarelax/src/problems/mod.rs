//! Benchmark problem suite: a diagonal linear map with known spectrum, a
//! discretized planar reaction-diffusion fixed point, and a genotype-mixture
//! EM map with a likelihood objective.

pub mod admixture;
pub mod bratu;
pub mod linear;

pub use admixture::{generate as generate_admixture, AdmixtureInstance, AdmixtureProblem};
pub use bratu::BratuProblem;
pub use linear::{elliptic_norm, LinearDiagProblem};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::accel::Mapping;

/// Serializable description of a benchmark problem, as accepted by the
/// command line tools.  `seed` feeds whatever randomness the problem uses
/// (starting point, generated data); deterministic problems ignore it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProblemSpec {
    Linear {
        #[serde(default = "default_linear_n")]
        n: usize,
    },
    Bratu {
        #[serde(default = "default_grid_n")]
        grid_n: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Admixture {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_j")]
        j: usize,
        #[serde(default = "default_n_ind")]
        n_ind: usize,
    },
}

fn default_linear_n() -> usize {
    19
}
fn default_grid_n() -> usize {
    50
}
fn default_lambda() -> f64 {
    6.0
}
fn default_k() -> usize {
    3
}
fn default_j() -> usize {
    100
}
fn default_n_ind() -> usize {
    150
}

impl ProblemSpec {
    /// Instantiates the map together with its default starting point.
    pub fn build(&self, seed: u64) -> (Box<dyn Mapping>, DVector<f64>) {
        match *self {
            ProblemSpec::Linear { n } => {
                let p = LinearDiagProblem::ramp(n);
                let x0 = DVector::zeros(p.dim());
                (Box::new(p), x0)
            }
            ProblemSpec::Bratu { grid_n, lambda } => {
                let p = BratuProblem::new(grid_n, lambda);
                let x0 = p.uniform_start(seed);
                (Box::new(p), x0)
            }
            ProblemSpec::Admixture { k, j, n_ind } => {
                let inst = admixture::generate(k, j, n_ind, seed);
                (Box::new(inst.problem), inst.start)
            }
        }
    }

    /// Dimension of the flattened iterate, without building the problem.
    pub fn dim(&self) -> usize {
        match *self {
            ProblemSpec::Linear { n } => n,
            ProblemSpec::Bratu { grid_n, .. } => grid_n * grid_n,
            ProblemSpec::Admixture { k, j, n_ind } => k * j + n_ind * k,
        }
    }

    /// Residual tolerance conventionally used with this problem.
    pub fn default_tol(&self) -> f64 {
        match self {
            ProblemSpec::Admixture { .. } => 1e-4,
            _ => 1e-8,
        }
    }

    /// The builtin configuration behind a bare problem name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(ProblemSpec::Linear { n: default_linear_n() }),
            "bratu" => Some(ProblemSpec::Bratu {
                grid_n: default_grid_n(),
                lambda: default_lambda(),
            }),
            "admixture" => Some(ProblemSpec::Admixture {
                k: default_k(),
                j: default_j(),
                n_ind: default_n_ind(),
            }),
            _ => None,
        }
    }
}
