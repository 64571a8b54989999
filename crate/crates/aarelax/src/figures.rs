//! Per-iteration trace datasets: residual-norm and relaxation-parameter
//! curves for the linear and Bratu examples, ready to plot from CSV.
//!
//! These generators run diagnostic strategy variants with safeguards
//! removed, so their output is marked `figure_mode` in the metadata and
//! must never be mixed into benchmark tables.

use std::io::{self, Write};

use nalgebra::DVector;
use serde::Serialize;

use crate::accel::{solve_observed, Mapping, SolveOptions};
use crate::problems::{elliptic_norm, BratuProblem, LinearDiagProblem, ProblemSpec};
use crate::relax::{ConfigError, Relaxation};

/// Which norm a residual row reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Euclidean,
    /// `sqrt(v' A^{-1} v)` for the problem's diagonal operator.
    Elliptic,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::Euclidean => f.write_str("euclidean"),
            NormKind::Elliptic => f.write_str("elliptic"),
        }
    }
}

/// One plotted point: iterate index, residual in the stated norm, and the
/// relaxation parameter of the step taken from that iterate (absent at the
/// start and at the final iterate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub residual: f64,
    pub norm: NormKind,
    pub beta: Option<f64>,
}

/// All rows of one algorithm's curve, plus the run totals for the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSet {
    pub label: String,
    pub iterations: usize,
    pub maps: usize,
    pub converged: bool,
    #[serde(skip_serializing)]
    pub rows: Vec<TraceRow>,
}

/// A full figure: configuration (serialized as the metadata sidecar) and
/// one trace per algorithm.
#[derive(Debug, Clone, Serialize)]
pub struct FigureData {
    pub figure: String,
    /// True whenever a diagnostic, unregularized variant is included; keeps
    /// figure output distinguishable from benchmark output.
    pub figure_mode: bool,
    pub problem: ProblemSpec,
    pub m: usize,
    pub tol: f64,
    pub max_maps: usize,
    pub composite: bool,
    pub x0: String,
    pub sets: Vec<TraceSet>,
}

impl FigureData {
    /// Stem for the metadata sidecar filename.  Composite runs get their own
    /// stem so plain and composite output can share a directory; per-curve
    /// CSVs do not need this because their labels already carry the suffix.
    pub fn file_stem(&self) -> String {
        if self.composite {
            format!("{}_c", self.figure)
        } else {
            self.figure.clone()
        }
    }
}

/// Runs one solve and collects its trace, in the Euclidean norm and, when a
/// diagonal operator is given, the elliptic norm as well.
pub fn trace_solve(
    problem: &dyn Mapping,
    x0: &DVector<f64>,
    strategy: Relaxation,
    opts: &SolveOptions,
    elliptic_diag: Option<&DVector<f64>>,
) -> Result<TraceSet, ConfigError> {
    let mut rows = Vec::new();
    let mut elliptic_rows = Vec::new();
    let report = solve_observed(problem, x0, strategy, opts, &mut |view| {
        rows.push(TraceRow {
            k: view.k,
            residual: view.residual_norm,
            norm: NormKind::Euclidean,
            beta: view.beta,
        });
        if let Some(diag) = elliptic_diag {
            elliptic_rows.push(TraceRow {
                k: view.k,
                residual: elliptic_norm(view.f, diag),
                norm: NormKind::Elliptic,
                beta: view.beta,
            });
        }
    })?;
    rows.extend(elliptic_rows);
    Ok(TraceSet {
        label: report.algo,
        iterations: report.iterations,
        maps: report.maps,
        converged: report.converged,
        rows,
    })
}

fn linear_figure(
    figure: &str,
    m: usize,
    strategies: &[Relaxation],
) -> Result<FigureData, ConfigError> {
    let spec = ProblemSpec::Linear { n: 19 };
    let problem = LinearDiagProblem::ramp(19);
    let x0 = DVector::zeros(19);
    let opts = SolveOptions { m, ..SolveOptions::default() };
    let mut sets = Vec::new();
    for strategy in strategies {
        sets.push(trace_solve(&problem, &x0, *strategy, &opts, Some(problem.diag()))?);
    }
    Ok(FigureData {
        figure: figure.into(),
        figure_mode: true,
        problem: spec,
        m,
        tol: opts.tol,
        max_maps: opts.max_maps,
        composite: false,
        x0: "zeros".into(),
        sets,
    })
}

/// Locally-optimal relaxation on the diagonal ramp: stationary AA against
/// the two unclamped locally-optimal variants.  Residuals come in both
/// norms since either reading of the original curves can be plotted.
pub fn trace_linear_aaopt(m: usize) -> Result<FigureData, ConfigError> {
    linear_figure(
        "linear_aaopt",
        m,
        &[Relaxation::Constant(1.0), Relaxation::Opt0Raw, Relaxation::Opt1Raw],
    )
}

/// Map-distance relaxation on the diagonal ramp: stationary AA, the two
/// probe diagnostics that spend an extra map to estimate in-iteration, and
/// the one-map lagged estimate applied raw.
pub fn trace_linear_aamd(m: usize) -> Result<FigureData, ConfigError> {
    linear_figure(
        "linear_aamd",
        m,
        &[
            Relaxation::Constant(1.0),
            Relaxation::MdProbe { warm_start: false },
            Relaxation::MdProbe { warm_start: true },
            Relaxation::MdRaw,
        ],
    )
}

/// The planar reaction-diffusion case at depth `m`, from the zero surface:
/// stationary AA at two relaxation values, both regularized locally-optimal
/// variants, regularized map-distance, and map-distance with every
/// safeguard removed.  `composite` interleaves the one-iteration inner
/// acceleration in all runs; iterate indices then count outer iterations.
pub fn trace_bratu(m: usize, composite: bool) -> Result<FigureData, ConfigError> {
    let spec = ProblemSpec::Bratu { grid_n: 50, lambda: 6.0 };
    let problem = BratuProblem::new(50, 6.0);
    let x0 = DVector::zeros(problem.dim());
    let opts = SolveOptions { m, composite, ..SolveOptions::default() };
    let strategies = [
        Relaxation::Constant(1.0),
        Relaxation::Constant(0.5),
        Relaxation::Opt0,
        Relaxation::Opt1,
        Relaxation::Md,
        Relaxation::MdRaw,
    ];
    let mut sets = Vec::new();
    for strategy in strategies {
        sets.push(trace_solve(&problem, &x0, strategy, &opts, None)?);
    }
    Ok(FigureData {
        figure: "bratu".into(),
        figure_mode: true,
        problem: spec,
        m,
        tol: opts.tol,
        max_maps: opts.max_maps,
        composite,
        x0: "zeros".into(),
        sets,
    })
}

/// `k,residual,norm,beta`; the beta cell is empty where no step was taken.
pub fn write_trace_csv<W: Write>(w: &mut W, set: &TraceSet) -> io::Result<()> {
    writeln!(w, "k,residual,norm,beta")?;
    for row in &set.rows {
        let beta = row.beta.map_or(String::new(), |b| format!("{b}"));
        writeln!(w, "{},{},{},{}", row.k, row.residual, row.norm, beta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<'a>(fig: &'a FigureData, label: &str) -> &'a TraceSet {
        fig.sets
            .iter()
            .find(|s| s.label == label)
            .unwrap_or_else(|| panic!("missing trace {label}"))
    }

    fn euclid_rows(s: &TraceSet) -> Vec<&TraceRow> {
        s.rows.iter().filter(|r| r.norm == NormKind::Euclidean).collect()
    }

    #[test]
    fn locally_optimal_figure_reproduces_speedups() {
        let fig = trace_linear_aaopt(8).unwrap();
        assert!(fig.figure_mode);
        assert_eq!(fig.sets.len(), 3);
        let base = set(&fig, "aa_b1");
        let opt0 = set(&fig, "opt0_raw");
        let opt1 = set(&fig, "opt1_raw");
        assert!(base.converged && opt0.converged && opt1.converged);

        // Shared starting point: identical first residual in both norms.
        for s in [opt0, opt1] {
            assert_eq!(s.rows[0].residual, base.rows[0].residual);
            assert_eq!(s.rows[0].beta, None);
        }

        // Stationary AA reports beta = 1 on every completed step.
        let rows = euclid_rows(base);
        assert_eq!(rows.last().unwrap().beta, None);
        assert!(rows[1..rows.len() - 1].iter().all(|r| r.beta == Some(1.0)));

        assert!(
            (opt1.iterations as f64) <= 0.45 * base.iterations as f64,
            "opt1_raw {} vs aa_b1 {}",
            opt1.iterations,
            base.iterations
        );
        let ratio = opt0.iterations as f64 / base.iterations as f64;
        assert!((0.8..=1.2).contains(&ratio), "opt0_raw/aa_b1 ratio {ratio}");
    }

    #[test]
    fn map_distance_figure_costs_and_excursions() {
        let fig = trace_linear_aamd(8).unwrap();
        let lagged = set(&fig, "md_noreg");
        assert_eq!(lagged.maps, lagged.iterations + 1, "one map per iteration");
        for label in ["md_probe_default", "md_probe_prev"] {
            let probe = set(&fig, label);
            assert!(probe.converged);
            assert_eq!(probe.maps, 2 * probe.iterations, "probe pays one extra map");

            let betas: Vec<f64> =
                euclid_rows(probe).iter().filter_map(|r| r.beta).collect();
            let above_one = betas.iter().filter(|b| **b > 1.0).count();
            assert!(
                above_one * 2 > betas.len(),
                "{label}: most estimates should exceed one, got {above_one}/{}",
                betas.len()
            );
        }
        // Excursions above two show up once the estimate feeds back into
        // the step (warm-started probe and lagged variants).
        for label in ["md_probe_prev", "md_noreg"] {
            let betas: Vec<f64> =
                euclid_rows(set(&fig, label)).iter().filter_map(|r| r.beta).collect();
            assert!(
                betas.iter().any(|b| *b > 2.0),
                "{label}: expected excursions above two"
            );
        }
    }

    #[test]
    fn full_depth_makes_all_variants_equal() {
        let fig = trace_linear_aamd(19).unwrap();
        let iters: Vec<usize> = fig.sets.iter().map(|s| s.iterations).collect();
        assert!(fig.sets.iter().all(|s| s.converged));
        let lo = *iters.iter().min().unwrap();
        let hi = *iters.iter().max().unwrap();
        assert!(hi - lo <= 2, "iteration counts {iters:?} should essentially agree");
    }

    #[test]
    fn traces_replay_identically() {
        let a = trace_linear_aamd(8).unwrap();
        let b = trace_linear_aamd(8).unwrap();
        assert_eq!(a.sets, b.sets);
    }

    #[test]
    fn composite_runs_get_their_own_file_stem() {
        let mut fig = FigureData {
            figure: "bratu".into(),
            figure_mode: true,
            problem: ProblemSpec::Bratu { grid_n: 50, lambda: 6.0 },
            m: 16,
            tol: 1e-8,
            max_maps: 10_000,
            composite: false,
            x0: "zeros".into(),
            sets: Vec::new(),
        };
        assert_eq!(fig.file_stem(), "bratu");
        fig.composite = true;
        assert_eq!(fig.file_stem(), "bratu_c");
    }

    #[test]
    fn elliptic_rows_match_euclidean_on_identity_operator() {
        let n = 6;
        let problem =
            LinearDiagProblem::new(DVector::from_element(n, 1.0), DVector::from_element(n, 1.0));
        let x0 = DVector::zeros(n);
        let opts = SolveOptions { m: 3, ..SolveOptions::default() };
        let trace = trace_solve(
            &problem,
            &x0,
            Relaxation::Constant(1.0),
            &opts,
            Some(problem.diag()),
        )
        .unwrap();
        let euclid: Vec<&TraceRow> =
            trace.rows.iter().filter(|r| r.norm == NormKind::Euclidean).collect();
        let ellip: Vec<&TraceRow> =
            trace.rows.iter().filter(|r| r.norm == NormKind::Elliptic).collect();
        assert_eq!(euclid.len(), ellip.len());
        for (e, l) in euclid.iter().zip(&ellip) {
            assert_eq!(e.k, l.k);
            assert_eq!(e.residual, l.residual);
            assert_eq!(e.beta, l.beta);
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let trace = TraceSet {
            label: "demo".into(),
            iterations: 2,
            maps: 3,
            converged: true,
            rows: vec![
                TraceRow { k: 0, residual: 2.0, norm: NormKind::Euclidean, beta: None },
                TraceRow { k: 1, residual: 0.5, norm: NormKind::Euclidean, beta: Some(1.25) },
                TraceRow { k: 2, residual: 0.0, norm: NormKind::Elliptic, beta: None },
            ],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            vec![
                "k,residual,norm,beta",
                "0,2,euclidean,",
                "1,0.5,euclidean,1.25",
                "2,0,elliptic,",
            ]
        );
    }

    #[test]
    fn reaction_diffusion_figure_shows_the_safeguard_story() {
        let fig = trace_bratu(16, false).unwrap();
        assert!(fig.figure_mode);
        let base = set(&fig, "aa_b1");
        let md = set(&fig, "md");
        let noreg = set(&fig, "md_noreg");
        let opt1 = set(&fig, "opt1");
        assert!(base.converged && md.converged && opt1.converged);

        // Regularized map-distance beats stationary AA at this depth.
        assert!(md.iterations < base.iterations);

        // The locally optimal mapped variant needs the fewest iterations of
        // the converged, regularized set.
        for s in &fig.sets {
            if s.label != "md_noreg" {
                assert!(
                    opt1.iterations <= s.iterations,
                    "opt1 {} vs {} {}",
                    opt1.iterations,
                    s.label,
                    s.iterations
                );
            }
        }

        // Without safeguards the estimate blows far past the cap, and the
        // run needs far more iterations than the regularized variant.
        let worst = euclid_rows(noreg)
            .iter()
            .filter_map(|r| r.beta)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst > 3.0, "unregularized estimates peaked at {worst}");
        assert!(!noreg.converged || noreg.iterations > md.iterations);
    }

    #[test]
    fn metadata_sidecar_flags_figure_mode() {
        let fig = trace_linear_aaopt(8).unwrap();
        let json = serde_json::to_value(&fig).unwrap();
        assert_eq!(json["figure_mode"], serde_json::json!(true));
        assert_eq!(json["problem"]["type"], serde_json::json!("linear"));
        assert_eq!(json["m"], serde_json::json!(8));
        // Rows stay in the CSV; the sidecar only carries the run totals.
        assert!(json["sets"][0].get("rows").is_none());
        assert!(json["sets"][0]["maps"].as_u64().unwrap() > 0);
    }
}
