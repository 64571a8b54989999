//! Accelerated fixed-point driver.
//!
//! Given a mapping `g`, the driver runs the windowed acceleration loop: at
//! every iteration it evaluates `g(x_k)`, appends the residual and iterate
//! differences to the incremental QR history, prunes ill-conditioned
//! columns, solves the mixing least-squares problem for the pair
//! `(x_bar, y_bar)`, and steps with the configured relaxation strategy.
//! Problems that expose an objective get a guard: a step that would lower
//! the objective is replaced by the plain map iterate.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::qr_ls::{MixingState, QrError, DEFAULT_COND_LIMIT};
use crate::relax::{
    beta_hat, beta_opt, opt0_regularize, opt1_clamp, relax_md_next, ConfigError, MdMemory,
    RelaxConfig, Relaxation,
};

/// A fixed-point problem `x = g(x)`.
pub trait Mapping {
    /// Number of unknowns.
    fn dim(&self) -> usize;

    /// Evaluates the map at `x`.
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Scalar merit of an iterate, larger is better.  Problems that return
    /// `Some` get the objective guard: accelerated steps that lower the
    /// merit are rejected in favor of the plain map iterate.
    fn objective(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Condition-number ceiling for the mixing history, overridable per
    /// problem class.
    fn condition_limit(&self) -> f64 {
        DEFAULT_COND_LIMIT
    }
}

/// Why the driver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Residual norm reached the tolerance.
    Tolerance,
    /// The map-evaluation budget ran out.
    MapBudget,
    /// A map evaluation produced NaN or infinite entries.
    NonFinite,
}

/// Solver options shared by all strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Mixing window: maximum number of difference pairs kept.  Zero turns
    /// the driver into the plain fixed-point iteration.
    pub m: usize,
    /// Stopping tolerance on the residual norm.
    pub tol: f64,
    /// Budget of map evaluations.
    pub max_maps: usize,
    /// Interleave a depth-1, one-iteration inner acceleration before each
    /// outer map evaluation.
    pub composite: bool,
    /// Condition ceiling override; defaults to the problem's own.
    pub cond_limit: Option<f64>,
    pub relax: RelaxConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            m: 8,
            tol: 1e-8,
            max_maps: 10_000,
            composite: false,
            cond_limit: None,
            relax: RelaxConfig::default(),
        }
    }
}

impl SolveOptions {
    fn validate(&self, strategy: &Relaxation) -> Result<(), ConfigError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ConfigError("tol must be positive and finite".into()));
        }
        if self.max_maps == 0 {
            return Err(ConfigError("max_maps must be at least 1".into()));
        }
        if let Some(c) = self.cond_limit {
            if !(c >= 1.0) {
                return Err(ConfigError("cond_limit must be at least 1".into()));
            }
        }
        self.relax.validate()?;
        if let Relaxation::Constant(b) = strategy {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(ConfigError("constant beta must be positive and finite".into()));
            }
        }
        Ok(())
    }
}

/// Outcome of one accelerated solve.
///
/// `residual_trace[i]` is the Euclidean norm of `f(x_i)`; the trace always
/// has `iterations + 1` entries (entry 0 belongs to the starting point).
/// `beta_trace` holds the relaxation parameter of every completed step.
/// `maps` counts every map evaluation, including the initial one, strategy
/// probes and inner-loop refinements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub algo: String,
    pub m: usize,
    pub converged: bool,
    pub iterations: usize,
    pub maps: usize,
    pub time_ns: u64,
    pub stop_reason: StopReason,
    pub residual_trace: Vec<f64>,
    pub beta_trace: Vec<f64>,
}

/// Per-iteration view handed to observers: the iterate, its residual and
/// the relaxation parameter of the step taken from it (`None` for the
/// starting point and for the final, converged iterate).
pub struct IterationView<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub f: &'a DVector<f64>,
    pub residual_norm: f64,
    pub beta: Option<f64>,
}

/// Runs the accelerated fixed-point iteration.
pub fn solve(
    problem: &dyn Mapping,
    x0: &DVector<f64>,
    strategy: Relaxation,
    opts: &SolveOptions,
) -> Result<SolveReport, ConfigError> {
    solve_observed(problem, x0, strategy, opts, &mut |_| {})
}

/// As [`solve`], invoking `observer` once per recorded iterate.
pub fn solve_observed(
    problem: &dyn Mapping,
    x0: &DVector<f64>,
    strategy: Relaxation,
    opts: &SolveOptions,
    observer: &mut dyn FnMut(&IterationView<'_>),
) -> Result<SolveReport, ConfigError> {
    opts.validate(&strategy)?;
    if x0.len() != problem.dim() {
        return Err(ConfigError(format!(
            "starting point has length {}, problem dimension is {}",
            x0.len(),
            problem.dim()
        )));
    }
    let start = Instant::now();
    let m_cap = opts.m.min(problem.dim());
    let cond_limit = opts.cond_limit.unwrap_or_else(|| problem.condition_limit());
    let mut history = MixingState::new(problem.dim(), m_cap.max(1), cond_limit);

    let mut maps = 0usize;
    let mut residual_trace = Vec::new();
    let mut beta_trace = Vec::new();

    let mut try_map = |maps: &mut usize, x: &DVector<f64>| -> Result<DVector<f64>, StopReason> {
        if *maps >= opts.max_maps {
            return Err(StopReason::MapBudget);
        }
        *maps += 1;
        let g = problem.apply(x);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(StopReason::NonFinite)
        }
    };

    let mut md_mem = MdMemory::default();
    let mut prev_mix: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut beta_reuse = opts.relax.beta_default;
    let mut probe_beta = opts.relax.beta_default;

    let label = {
        let base = strategy.label(&opts.relax);
        if opts.composite {
            format!("{base}_c")
        } else {
            base
        }
    };
    let finish = |stop: StopReason,
                  maps: usize,
                  residual_trace: Vec<f64>,
                  beta_trace: Vec<f64>| SolveReport {
        algo: label.clone(),
        m: m_cap,
        converged: stop == StopReason::Tolerance,
        iterations: residual_trace.len().saturating_sub(1),
        maps,
        time_ns: start.elapsed().as_nanos().try_into().unwrap_or(u64::MAX),
        stop_reason: stop,
        residual_trace,
        beta_trace,
    };

    // Initial map: x_1 = g(x_0), which also yields f(x_0).
    let g0 = match try_map(&mut maps, x0) {
        Ok(g) => g,
        Err(stop) => return Ok(finish(stop, maps, residual_trace, beta_trace)),
    };
    let f0 = &g0 - x0;
    let r0 = f0.norm();
    residual_trace.push(r0);
    observer(&IterationView { k: 0, x: x0, f: &f0, residual_norm: r0, beta: None });
    if r0 <= opts.tol {
        return Ok(finish(StopReason::Tolerance, maps, residual_trace, beta_trace));
    }

    let mut x_prev = x0.clone();
    let mut f_prev = f0;
    let mut x = g0;

    let mut k = 0usize;
    let stop = loop {
        k += 1;
        if opts.composite {
            match inner_refine(problem, &mut try_map, &mut maps, &x) {
                Ok(z) => x = z,
                Err(stop) => break stop,
            }
        }
        let g_k = match try_map(&mut maps, &x) {
            Ok(g) => g,
            Err(stop) => break stop,
        };
        let f_k = &g_k - &x;
        let r_k = f_k.norm();
        residual_trace.push(r_k);
        if r_k <= opts.tol {
            observer(&IterationView { k, x: &x, f: &f_k, residual_norm: r_k, beta: None });
            break StopReason::Tolerance;
        }

        if m_cap > 0 {
            if history.depth() == m_cap {
                history.drop_oldest();
            }
            history
                .append(&f_k - &f_prev, &x - &x_prev)
                .expect("finite differences of finite iterates");
            history.prune_to_condition();
        }
        let (x_bar, y_bar) = mix_with_fallback(&mut history, &f_k, &x, &g_k);

        // Relaxation step.
        let step = (|| -> Result<(f64, DVector<f64>), StopReason> {
            match strategy {
                Relaxation::Constant(b) => Ok((b, blend(&x_bar, &y_bar, b))),
                Relaxation::Opt0 | Relaxation::Opt0Raw => {
                    let g_xbar = try_map(&mut maps, &x_bar)?;
                    let g_ybar = try_map(&mut maps, &y_bar)?;
                    let f_xbar = &g_xbar - &x_bar;
                    let f_ybar = &g_ybar - &y_bar;
                    let star = beta_opt(&f_xbar, &f_ybar);
                    let beta = if strategy == Relaxation::Opt0 {
                        opt0_regularize(star, &opts.relax)
                    } else {
                        star.unwrap_or(opts.relax.beta_default)
                    };
                    Ok((beta, blend(&x_bar, &y_bar, beta)))
                }
                Relaxation::Opt1 | Relaxation::Opt1Raw => {
                    let recompute = strategy == Relaxation::Opt1Raw
                        || k == 1
                        || k % opts.relax.period == 0;
                    if recompute {
                        let g_xbar = try_map(&mut maps, &x_bar)?;
                        let g_ybar = try_map(&mut maps, &y_bar)?;
                        let f_xbar = &g_xbar - &x_bar;
                        let f_ybar = &g_ybar - &y_bar;
                        let star = beta_opt(&f_xbar, &f_ybar);
                        let beta = if strategy == Relaxation::Opt1 {
                            opt1_clamp(star, &opts.relax)
                        } else {
                            star.unwrap_or(opts.relax.beta_default)
                        };
                        beta_reuse = beta;
                        Ok((beta, blend(&g_xbar, &g_ybar, beta)))
                    } else {
                        Ok((beta_reuse, blend(&x_bar, &y_bar, beta_reuse)))
                    }
                }
                Relaxation::Md | Relaxation::MdRaw => {
                    let hat = prev_mix.as_ref().and_then(|(px, py)| {
                        let d_prev = py - px;
                        beta_hat(&d_prev, &g_k, px)
                    });
                    let beta = if strategy == Relaxation::Md {
                        relax_md_next(&mut md_mem, &opts.relax, hat)
                    } else {
                        hat.unwrap_or(opts.relax.beta_default)
                    };
                    Ok((beta, blend(&x_bar, &y_bar, beta)))
                }
                Relaxation::MdProbe { warm_start } => {
                    let d_bar = &y_bar - &x_bar;
                    let probe = if warm_start { probe_beta } else { opts.relax.beta_default };
                    let x_cand = &x_bar + &d_bar * probe;
                    let g_cand = try_map(&mut maps, &x_cand)?;
                    let hat = beta_hat(&d_bar, &g_cand, &x_bar).unwrap_or(probe);
                    probe_beta = hat;
                    Ok((hat, &x_bar + &d_bar * hat))
                }
            }
        })();
        let (beta, candidate) = match step {
            Ok(s) => s,
            Err(stop) => break stop,
        };
        if matches!(strategy, Relaxation::Md | Relaxation::MdRaw) {
            prev_mix = Some((x_bar, y_bar));
        }

        let x_next = guarded_step(problem, &g_k, candidate);
        beta_trace.push(beta);
        observer(&IterationView { k, x: &x, f: &f_k, residual_norm: r_k, beta: Some(beta) });

        x_prev = std::mem::replace(&mut x, x_next);
        f_prev = f_k;
    };
    Ok(finish(stop, maps, residual_trace, beta_trace))
}

/// Accepts `candidate` only when the problem declares an objective and the
/// candidate does not lower it relative to `fallback` (ties keep the
/// candidate).  A non-finite candidate objective rejects the candidate.
/// Problems without an objective always accept.
pub fn guarded_step(
    problem: &dyn Mapping,
    fallback: &DVector<f64>,
    candidate: DVector<f64>,
) -> DVector<f64> {
    match problem.objective(&candidate) {
        None => candidate,
        Some(obj_candidate) => {
            let obj_fallback =
                problem.objective(fallback).unwrap_or(f64::NEG_INFINITY);
            if obj_candidate.is_finite() && obj_candidate >= obj_fallback {
                candidate
            } else {
                fallback.clone()
            }
        }
    }
}

/// Blends the mixed pair; `beta == 1` returns `y_bar` verbatim so that the
/// windowless driver reproduces the plain fixed-point iteration bitwise.
fn blend(x_bar: &DVector<f64>, y_bar: &DVector<f64>, beta: f64) -> DVector<f64> {
    if beta == 1.0 {
        y_bar.clone()
    } else {
        let mut out = y_bar - x_bar;
        out *= beta;
        out += x_bar;
        out
    }
}

/// Mixing with degeneracy fallback: a numerically singular factor sheds its
/// oldest columns until the solve succeeds, degenerating to the plain pair.
fn mix_with_fallback(
    history: &mut MixingState,
    f_k: &DVector<f64>,
    x_k: &DVector<f64>,
    g_k: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    loop {
        match history.solve_mixing(f_k, x_k, g_k) {
            Ok(pair) => return pair,
            Err(QrError::DegenerateFactor) => history.drop_oldest(),
            Err(_) => return (x_k.clone(), g_k.clone()),
        }
    }
}

/// One-iteration, depth-1 inner acceleration with unit relaxation, sharing
/// no history with the outer loop.  Returns the refined iterate; at a fixed
/// point the refinement is absorbed and the iterate returns unchanged.
fn inner_refine(
    problem: &dyn Mapping,
    try_map: &mut impl FnMut(&mut usize, &DVector<f64>) -> Result<DVector<f64>, StopReason>,
    maps: &mut usize,
    z0: &DVector<f64>,
) -> Result<DVector<f64>, StopReason> {
    let z1 = try_map(maps, z0)?;
    let f0 = &z1 - z0;
    let g_z1 = try_map(maps, &z1)?;
    let f1 = &g_z1 - &z1;
    let df = &f1 - &f0;
    let den = df.norm_squared();
    if den == 0.0 || !den.is_finite() {
        return Ok(g_z1);
    }
    let gamma = f1.dot(&df) / den;
    let dx = &z1 - z0;
    // y_bar of the depth-1 solve; unit relaxation steps straight to it.
    let mut y_bar = g_z1.clone();
    y_bar.axpy(-gamma, &dx, 1.0);
    y_bar.axpy(-gamma, &df, 1.0);
    Ok(guarded_step(problem, &g_z1, y_bar))
}
