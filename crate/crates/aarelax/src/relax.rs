//! Relaxation-parameter strategies for the accelerated fixed-point driver.
//!
//! After the mixing step produces the pair `(x_bar, y_bar)`, the next
//! iterate is the blend `x_bar + beta (y_bar - x_bar)`.  This module decides
//! `beta`: either a constant, a locally optimal value estimated from two
//! extra map evaluations, or an adaptive value recycled from quantities the
//! iteration already computed, at no extra map cost.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Tuning knobs shared by the relaxation strategies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxConfig {
    /// Fallback value emitted whenever a strategy declines to estimate.
    pub beta_default: f64,
    /// Upper cap applied to estimated relaxation parameters.
    pub beta_max: f64,
    /// Recompute period for the locally optimal strategy: the two extra map
    /// evaluations are spent at iteration 1 and whenever `k % period == 0`.
    pub period: usize,
    /// Stability window: an adaptive estimate is trusted only when two
    /// consecutive estimates differ by less than this.
    pub delta: f64,
    /// Maximum run of consecutive emitted values above one before the
    /// adaptive strategy resets to the default.
    pub max_above_one: usize,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            beta_default: 1.0,
            beta_max: 3.0,
            period: 1,
            delta: 2.0,
            max_above_one: 10,
        }
    }
}

/// Invalid solver or relaxation configuration.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl RelaxConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.beta_max > 0.0 && self.beta_max.is_finite()) {
            return Err(ConfigError("beta_max must be positive and finite".into()));
        }
        if !(self.beta_default > 0.0 && self.beta_default <= self.beta_max) {
            return Err(ConfigError(format!(
                "beta_default must lie in (0, beta_max = {}]",
                self.beta_max
            )));
        }
        if self.period == 0 {
            return Err(ConfigError("period must be at least 1".into()));
        }
        if !(self.delta > 0.0) {
            return Err(ConfigError("delta must be positive".into()));
        }
        Ok(())
    }
}

/// How the blend parameter is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Fixed relaxation parameter.
    Constant(f64),
    /// Locally optimal beta applied to the mixed pair itself, with the
    /// estimate replaced by 0.5 whenever it is zero or outside (0, 1].
    Opt0,
    /// As [`Relaxation::Opt0`] but with the raw estimate, no safeguard.
    /// Diagnostic mode used by the trace generators.
    Opt0Raw,
    /// Locally optimal beta applied to the mapped pair, re-estimated every
    /// `period` iterations and recycled in between.  Estimates at or below
    /// zero fall back to the default; positive ones are capped at beta_max.
    Opt1,
    /// As [`Relaxation::Opt1`] but re-estimated every iteration and applied
    /// raw.  Diagnostic mode used by the trace generators.
    Opt1Raw,
    /// Adaptive relaxation driven by the map-distance estimate, guarded by
    /// the stability window, the cap and the above-one run limit.
    Md,
    /// As [`Relaxation::Md`] with every safeguard removed: the previous
    /// map-distance estimate is applied verbatim.  Diagnostic mode showing
    /// why the safeguards exist.
    MdRaw,
    /// Diagnostic probe: spends one extra map per iteration to evaluate the
    /// map-distance estimate at the current iteration and applies it
    /// immediately.  `warm_start` selects whether the probe step uses the
    /// previous estimate or the default.
    MdProbe { warm_start: bool },
}

impl Relaxation {
    /// True for the strategies that may emit values above one and therefore
    /// benefit from an objective guard on hard problems.
    pub fn is_adaptive(&self) -> bool {
        !matches!(self, Relaxation::Constant(_))
    }

    /// Short machine label used in reports and CSV output.
    pub fn label(&self, cfg: &RelaxConfig) -> String {
        match self {
            Relaxation::Constant(b) => format!("aa_b{}", b),
            Relaxation::Opt0 => "opt0".into(),
            Relaxation::Opt0Raw => "opt0_raw".into(),
            Relaxation::Opt1 => {
                if cfg.period == 1 {
                    "opt1".into()
                } else {
                    format!("opt1_t{}", cfg.period)
                }
            }
            Relaxation::Opt1Raw => "opt1_raw".into(),
            Relaxation::Md => "md".into(),
            Relaxation::MdRaw => "md_noreg".into(),
            Relaxation::MdProbe { warm_start: false } => "md_probe_default".into(),
            Relaxation::MdProbe { warm_start: true } => "md_probe_prev".into(),
        }
    }
}

/// Locally optimal relaxation parameter.
///
/// Minimizes `|| f(x_bar) + beta (f(y_bar) - f(x_bar)) ||` over `beta`:
///
/// ```text
///     beta* = - <f(y_bar) - f(x_bar), f(x_bar)> / || f(y_bar) - f(x_bar) ||^2
/// ```
///
/// Returns `None` when the two residuals coincide and the quotient is
/// undefined; callers substitute the configured default.
pub fn beta_opt(f_xbar: &DVector<f64>, f_ybar: &DVector<f64>) -> Option<f64> {
    let d = f_ybar - f_xbar;
    let den = d.norm_squared();
    if den == 0.0 || !den.is_finite() {
        return None;
    }
    let beta = -d.dot(f_xbar) / den;
    beta.is_finite().then_some(beta)
}

/// Map-distance relaxation estimate.
///
/// Minimizes `|| x_bar + beta d_bar - g_next ||` over `beta`, i.e. moves the
/// blended iterate as close as possible to the observed map value:
///
/// ```text
///     beta_hat = <d_bar, g_next - x_bar> / || d_bar ||^2
/// ```
///
/// `g_next` is the map of the iterate the blend produced, so the estimate
/// costs nothing: the driver evaluates that map anyway on the next
/// iteration.  Returns `None` when `d_bar` vanishes.
pub fn beta_hat(d_bar: &DVector<f64>, g_next: &DVector<f64>, x_bar: &DVector<f64>) -> Option<f64> {
    let den = d_bar.norm_squared();
    if den == 0.0 || !den.is_finite() {
        return None;
    }
    let num = d_bar.dot(g_next) - d_bar.dot(x_bar);
    let beta = num / den;
    beta.is_finite().then_some(beta)
}

/// Safeguard for [`Relaxation::Opt0`]: the estimate is kept only inside the
/// unit interval (zero excluded, one included); anything else becomes 0.5.
/// An undefined estimate becomes the configured default.
pub fn opt0_regularize(beta_star: Option<f64>, cfg: &RelaxConfig) -> f64 {
    match beta_star {
        None => cfg.beta_default,
        Some(b) if b > 0.0 && b <= 1.0 => b,
        Some(_) => 0.5,
    }
}

/// Safeguard for [`Relaxation::Opt1`]: estimates at or below zero fall back
/// to the default, positive ones are capped at `beta_max`.
pub fn opt1_clamp(beta_star: Option<f64>, cfg: &RelaxConfig) -> f64 {
    match beta_star {
        None => cfg.beta_default,
        Some(b) if b <= 0.0 => cfg.beta_default,
        Some(b) => b.min(cfg.beta_max),
    }
}

/// Rolling memory of the adaptive map-distance strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct MdMemory {
    hat_prev: Option<f64>,
    above_one_run: usize,
}

impl MdMemory {
    /// Latest stored estimate, if any.
    pub fn hat_prev(&self) -> Option<f64> {
        self.hat_prev
    }

    /// Current run length of emitted values above one.
    pub fn above_one_run(&self) -> usize {
        self.above_one_run
    }
}

/// One step of the adaptive map-distance strategy.
///
/// `hat_new` is the estimate for the previous iteration, just computed from
/// the current map value (`None` on the first iterations or when the blend
/// direction vanished).  The estimate is applied only when all safeguards
/// hold:
///
/// * two consecutive estimates exist and differ by less than `delta`,
/// * the run of emitted values above one has not exceeded `max_above_one`,
/// * the estimate is positive.
///
/// A trusted estimate is capped at `beta_max`; otherwise the default is
/// emitted.  Emitting a value above one lengthens the above-one run, any
/// other value resets it, so at most `max_above_one + 1` consecutive values
/// above one can ever be emitted.
pub fn relax_md_next(mem: &mut MdMemory, cfg: &RelaxConfig, hat_new: Option<f64>) -> f64 {
    let beta = match (hat_new, mem.hat_prev) {
        (Some(h1), Some(h2))
            if (h1 - h2).abs() < cfg.delta && mem.above_one_run <= cfg.max_above_one && h1 > 0.0 =>
        {
            h1.min(cfg.beta_max)
        }
        _ => cfg.beta_default,
    };
    mem.hat_prev = hat_new;
    if beta > 1.0 {
        mem.above_one_run += 1;
    } else {
        mem.above_one_run = 0;
    }
    beta
}
