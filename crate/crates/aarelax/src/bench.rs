//! Experiment harness: repeated seeded solves over an algorithm grid,
//! summary tables with distribution-free median confidence intervals,
//! performance profiles, and history-depth selection.
//!
//! A sweep runs every algorithm on the same sequence of problem draws
//! (seed `seed_base + draw`), so per-draw comparisons are paired.  Wall
//! time is measured inside [`crate::accel::solve`] around the iteration
//! only; problem construction and data generation never count.  Runs are
//! executed serially so timings stay comparable.

use std::io::{self, Write};
use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::accel::{solve, Mapping, SolveOptions};
use crate::problems::ProblemSpec;
use crate::relax::{ConfigError, RelaxConfig, Relaxation};

/// One algorithm entry of an experiment plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgoSpec {
    pub strategy: Relaxation,
    #[serde(default)]
    pub relax: RelaxConfig,
    #[serde(default)]
    pub composite: bool,
    /// Fixed history depth.  When absent the algorithm is run once per
    /// entry of the plan's `m_grid`.
    #[serde(default)]
    pub m: Option<usize>,
    /// Display label override; derived from the strategy when absent.
    #[serde(default)]
    pub label: Option<String>,
}

impl AlgoSpec {
    pub fn new(strategy: Relaxation) -> Self {
        Self { strategy, relax: RelaxConfig::default(), composite: false, m: None, label: None }
    }

    pub fn display_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let base = self.strategy.label(&self.relax);
        if self.composite {
            format!("{base}_c")
        } else {
            base
        }
    }
}

/// A full sweep description, readable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgoSpec>,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<usize>,
    pub draws: usize,
    /// Stopping tolerance; the problem's conventional tolerance when absent.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "default_max_maps")]
    pub max_maps: usize,
    #[serde(default)]
    pub seed_base: u64,
}

fn default_m_grid() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64]
}

fn default_max_maps() -> usize {
    10_000
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.draws == 0 {
            return Err(ConfigError("draws must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(ConfigError("plan needs at least one algorithm".into()));
        }
        let dim = self.problem.dim();
        for algo in &self.algorithms {
            algo.relax.validate()?;
            for m in algo.m.map_or_else(|| self.m_grid.clone(), |m| vec![m]) {
                if m > dim {
                    return Err(ConfigError(format!(
                        "history depth {m} exceeds problem dimension {dim}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn tol(&self) -> f64 {
        self.tol.unwrap_or_else(|| self.problem.default_tol())
    }
}

/// Flat result of one solve inside a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub algo: String,
    pub m: usize,
    pub draw: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub maps: usize,
    pub time_ns: u64,
}

impl RunRecord {
    pub fn time_seconds(&self) -> f64 {
        Duration::from_nanos(self.time_ns).as_secs_f64()
    }
}

/// Runs the plan, one record per (draw, algorithm, depth).
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<RunRecord>, ConfigError> {
    run_experiment_with(plan, &mut |spec, seed| spec.build(seed))
}

/// As [`run_experiment`] with an explicit problem factory, so tests can
/// instrument construction and verify it stays outside the timings.
pub fn run_experiment_with(
    plan: &ExperimentPlan,
    factory: &mut dyn FnMut(&ProblemSpec, u64) -> (Box<dyn Mapping>, DVector<f64>),
) -> Result<Vec<RunRecord>, ConfigError> {
    plan.validate()?;
    let tol = plan.tol();
    let mut records = Vec::new();
    for draw in 0..plan.draws {
        let seed = plan.seed_base + draw as u64;
        let (problem, x0) = factory(&plan.problem, seed);
        for algo in &plan.algorithms {
            let depths = algo.m.map_or_else(|| plan.m_grid.clone(), |m| vec![m]);
            for m in depths {
                let opts = SolveOptions {
                    m,
                    tol,
                    max_maps: plan.max_maps,
                    composite: algo.composite,
                    cond_limit: None,
                    relax: algo.relax,
                };
                let report = solve(problem.as_ref(), &x0, algo.strategy, &opts)?;
                records.push(RunRecord {
                    algo: algo.display_label(),
                    m,
                    draw,
                    seed,
                    converged: report.converged,
                    iterations: report.iterations,
                    maps: report.maps,
                    time_ns: report.time_ns,
                });
            }
        }
    }
    Ok(records)
}

/// Distribution-free confidence interval for a median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianCi {
    pub lo: f64,
    pub hi: f64,
    /// True when no order-statistic pair reaches the requested coverage and
    /// the interval fell back to the sample extremes.
    pub clamped: bool,
}

/// `P[X <= k]` for `X ~ Binomial(n, 1/2)`, evaluated through the log-space
/// probability recurrence so large `n` cannot underflow the first term.
fn binom_half_cdf(n: usize, k: usize) -> f64 {
    let mut ln_pmf = -(n as f64) * std::f64::consts::LN_2;
    let mut cdf = ln_pmf.exp();
    for i in 0..k.min(n) {
        ln_pmf += ((n - i) as f64 / (i + 1) as f64).ln();
        cdf += ln_pmf.exp();
    }
    cdf.min(1.0)
}

/// 1-indexed order-statistic ranks `(l, u)` such that the interval between
/// the `l`-th and `u`-th smallest samples covers the median with probability
/// at least `level`: the largest `l` with `P[X < l] <= (1-level)/2` for
/// `X ~ Binomial(n, 1/2)`, and `u = n + 1 - l`.  `None` when not even the
/// sample extremes reach the coverage.
pub fn median_ci_ranks(n: usize, level: f64) -> Option<(usize, usize)> {
    assert!(n >= 1, "need at least one sample");
    assert!((0.0..1.0).contains(&level), "level must be in [0, 1)");
    let half_alpha = (1.0 - level) / 2.0;
    let mut best = None;
    for l in 1..=n.div_ceil(2) {
        if binom_half_cdf(n, l - 1) <= half_alpha {
            best = Some(l);
        } else {
            break;
        }
    }
    best.map(|l| (l, n + 1 - l))
}

/// Median confidence interval by order statistics.  Meant for ten or more
/// samples; with fewer the interval may degrade to the clamped extremes.
pub fn median_ci(samples: &[f64], level: f64) -> Option<MedianCi> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not be NaN"));
    let n = sorted.len();
    match median_ci_ranks(n, level) {
        Some((l, u)) => Some(MedianCi { lo: sorted[l - 1], hi: sorted[u - 1], clamped: false }),
        None => Some(MedianCi { lo: sorted[0], hi: sorted[n - 1], clamped: true }),
    }
}

/// Upper empirical quantile: the sample at 1-indexed rank `ceil(q * n)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Summary row for one (algorithm, depth) group.  Intervals summarize the
/// converged runs; the convergence rate counts all of them.
#[derive(Debug, Clone)]
pub struct AlgoSummary {
    pub algo: String,
    pub m: usize,
    pub runs: usize,
    pub converged_rate: f64,
    pub iter_ci: Option<MedianCi>,
    pub maps_ci: Option<MedianCi>,
    /// Seconds.
    pub time_ci: Option<MedianCi>,
}

/// Groups records by (algorithm, depth), in first-appearance order.
pub fn summarize(records: &[RunRecord], level: f64) -> Vec<AlgoSummary> {
    let mut rows: Vec<AlgoSummary> = Vec::new();
    for rec in records {
        if !rows.iter().any(|r| r.algo == rec.algo && r.m == rec.m) {
            let group: Vec<&RunRecord> =
                records.iter().filter(|r| r.algo == rec.algo && r.m == rec.m).collect();
            let total = group.len();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.converged).collect();
            let collect = |f: &dyn Fn(&RunRecord) -> f64| -> Vec<f64> {
                ok.iter().map(|r| f(r)).collect()
            };
            let iters = collect(&|r| r.iterations as f64);
            let maps = collect(&|r| r.maps as f64);
            let times = collect(&|r| r.time_seconds());
            rows.push(AlgoSummary {
                algo: rec.algo.clone(),
                m: rec.m,
                runs: total,
                converged_rate: ok.len() as f64 / total as f64,
                iter_ci: median_ci(&iters, level),
                maps_ci: median_ci(&maps, level),
                time_ci: median_ci(&times, level),
            });
        }
    }
    rows
}

/// Cost measure a performance profile compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMetric {
    Time,
    Maps,
}

/// Dolan-More performance profile over paired draws.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub algos: Vec<String>,
    pub taus: Vec<f64>,
    /// `rho[a][t]`: fraction of included draws where algorithm `a` stayed
    /// within factor `taus[t]` of that draw's fastest algorithm.
    pub rho: Vec<Vec<f64>>,
    /// Draws dropped from the denominator because no algorithm converged.
    pub excluded_draws: usize,
}

/// Geometric grid from 1 to 32, 200 points.
pub fn default_tau_grid() -> Vec<f64> {
    let points = 200;
    (0..points).map(|i| 32f64.powf(i as f64 / (points - 1) as f64)).collect()
}

/// Computes profile curves from sweep records.  Groups are (algorithm,
/// depth) pairs; the depth is appended to the label only when an algorithm
/// appears at several depths.  Costs of non-converged runs are infinite,
/// and draws where every group failed are excluded and tallied.
pub fn performance_profile(
    records: &[RunRecord],
    taus: &[f64],
    metric: ProfileMetric,
) -> ProfileTable {
    assert!(!taus.is_empty());
    assert!(taus.windows(2).all(|w| w[0] <= w[1]), "tau grid must be sorted");
    let mut keys: Vec<(String, usize)> = Vec::new();
    for rec in records {
        let key = (rec.algo.clone(), rec.m);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let algos: Vec<String> = keys
        .iter()
        .map(|(name, m)| {
            let multi = keys.iter().filter(|(n, _)| n == name).count() > 1;
            if multi {
                format!("{name}_m{m}")
            } else {
                name.clone()
            }
        })
        .collect();

    let mut draws: Vec<usize> = records.iter().map(|r| r.draw).collect();
    draws.sort_unstable();
    draws.dedup();

    let cost = |r: &RunRecord| -> f64 {
        if !r.converged {
            return f64::INFINITY;
        }
        match metric {
            ProfileMetric::Time => r.time_seconds(),
            ProfileMetric::Maps => r.maps as f64,
        }
    };

    // ratios[a] holds one entry per included draw.
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); keys.len()];
    let mut excluded = 0usize;
    for draw in draws {
        let costs: Vec<f64> = keys
            .iter()
            .map(|(name, m)| {
                records
                    .iter()
                    .find(|r| r.draw == draw && &r.algo == name && r.m == *m)
                    .map_or(f64::INFINITY, &cost)
            })
            .collect();
        let best = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            excluded += 1;
            continue;
        }
        for (a, c) in costs.iter().enumerate() {
            ratios[a].push(if c.is_finite() { c / best } else { f64::INFINITY });
        }
    }

    let included = ratios.first().map_or(0, Vec::len);
    let rho = ratios
        .iter()
        .map(|rs| {
            taus.iter()
                .map(|tau| {
                    if included == 0 {
                        0.0
                    } else {
                        rs.iter().filter(|r| **r <= *tau).count() as f64 / included as f64
                    }
                })
                .collect()
        })
        .collect();
    ProfileTable { algos, taus: taus.to_vec(), rho, excluded_draws: excluded }
}

/// Depth choice for one algorithm.
#[derive(Debug, Clone)]
pub struct DepthChoice {
    pub algo: String,
    /// `None` when every depth failed on every draw.
    pub chosen_m: Option<usize>,
    /// (depth, 0.75 quantile of wall time in seconds), ascending depth.
    pub scores: Vec<(usize, f64)>,
}

/// Picks, per algorithm, the depth with the smallest 0.75 quantile of wall
/// time; non-converged runs count as infinitely slow, and ties go to the
/// smaller depth.
pub fn select_depth(records: &[RunRecord]) -> Vec<DepthChoice> {
    let mut algos: Vec<String> = Vec::new();
    for rec in records {
        if !algos.contains(&rec.algo) {
            algos.push(rec.algo.clone());
        }
    }
    algos
        .into_iter()
        .map(|algo| {
            let mut depths: Vec<usize> =
                records.iter().filter(|r| r.algo == algo).map(|r| r.m).collect();
            depths.sort_unstable();
            depths.dedup();
            let per_depth: Vec<(usize, Vec<f64>)> = depths
                .into_iter()
                .map(|m| {
                    let times = records
                        .iter()
                        .filter(|r| r.algo == algo && r.m == m)
                        .map(|r| if r.converged { r.time_seconds() } else { f64::INFINITY })
                        .collect();
                    (m, times)
                })
                .collect();
            let (chosen_m, scores) = select_from_scores(&per_depth);
            DepthChoice { algo, chosen_m, scores }
        })
        .collect()
}

/// The selection rule on raw score samples, exposed for deterministic
/// fixtures: minimize the 0.75 quantile, smaller depth wins ties, and an
/// all-infinite table selects nothing.
pub fn select_from_scores(per_depth: &[(usize, Vec<f64>)]) -> (Option<usize>, Vec<(usize, f64)>) {
    let mut scores: Vec<(usize, f64)> = per_depth
        .iter()
        .map(|(m, times)| {
            let mut sorted = times.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
            (*m, quantile(&sorted, 0.75))
        })
        .collect();
    scores.sort_by_key(|(m, _)| *m);
    let mut chosen: Option<(usize, f64)> = None;
    for (m, s) in &scores {
        if s.is_finite() && chosen.map_or(true, |(_, best)| *s < best) {
            chosen = Some((*m, *s));
        }
    }
    (chosen.map(|(m, _)| m), scores)
}

fn fmt_ci(ci: &Option<MedianCi>) -> (String, String) {
    match ci {
        Some(c) => (format!("{}", c.lo), format!("{}", c.hi)),
        None => (String::new(), String::new()),
    }
}

/// `algo,m,iter_lo,iter_hi,maps_lo,maps_hi,time_lo,time_hi,converged_rate`
pub fn write_summary_csv<W: Write>(w: &mut W, rows: &[AlgoSummary]) -> io::Result<()> {
    writeln!(w, "algo,m,iter_lo,iter_hi,maps_lo,maps_hi,time_lo,time_hi,converged_rate")?;
    for row in rows {
        let (il, ih) = fmt_ci(&row.iter_ci);
        let (ml, mh) = fmt_ci(&row.maps_ci);
        let (tl, th) = fmt_ci(&row.time_ci);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            row.algo, row.m, il, ih, ml, mh, tl, th, row.converged_rate
        )?;
    }
    Ok(())
}

/// `algo,tau,rho`, long format, one row per curve point.
pub fn write_profile_csv<W: Write>(w: &mut W, table: &ProfileTable) -> io::Result<()> {
    writeln!(w, "algo,tau,rho")?;
    for (a, algo) in table.algos.iter().enumerate() {
        for (t, tau) in table.taus.iter().enumerate() {
            writeln!(w, "{},{},{}", algo, tau, table.rho[a][t])?;
        }
    }
    Ok(())
}

/// `algo,m,draw,seed,converged,iterations,maps,time_ns`, one row per run.
pub fn write_runs_csv<W: Write>(w: &mut W, records: &[RunRecord]) -> io::Result<()> {
    writeln!(w, "algo,m,draw,seed,converged,iterations,maps,time_ns")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.algo, r.m, r.draw, r.seed, r.converged, r.iterations, r.maps, r.time_ns
        )?;
    }
    Ok(())
}
