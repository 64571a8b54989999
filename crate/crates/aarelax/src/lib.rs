//! Anderson acceleration for fixed-point iterations `x = g(x)`, with
//! relaxation strategies that adapt the damping parameter while the
//! iteration runs.
//!
//! The driver in [`accel`] wraps any map implementing [`accel::Mapping`].
//! Each iteration solves a small norm-minimization problem over the recent
//! history through an incrementally updated QR factorization ([`qr_ls`]),
//! producing a mixed pair `(x_bar, y_bar)`; the next iterate is the blend
//! `x_bar + beta (y_bar - x_bar)`.  The strategies in [`relax`] choose
//! `beta`: a constant, a locally optimal estimate recomputed periodically at
//! the cost of two extra map evaluations, or a map-distance estimate
//! recycled from values the iteration computes anyway.  Maps that expose an
//! objective get a monotonicity guard on every accelerated step.
//!
//! [`problems`] ships three benchmark maps (a diagonal linear contraction, a
//! planar reaction-diffusion fixed point, a genotype-mixture EM map),
//! [`bench`] runs randomized sweeps with distribution-free median intervals
//! and performance profiles, and [`figures`] generates per-iteration trace
//! datasets.  The `aarelax` binary exposes all of it on the command line;
//! the `examples/` directory walks through each capability.

pub mod accel;
pub mod bench;
pub mod figures;
pub mod problems;
pub mod qr_ls;
pub mod relax;

pub use accel::{solve, solve_observed, Mapping, SolveOptions, SolveReport};
pub use relax::{RelaxConfig, Relaxation};
