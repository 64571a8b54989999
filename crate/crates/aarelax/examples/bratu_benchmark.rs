//! Benchmarks nine relaxation strategies on the Bratu problem over randomly
//! drawn starting points and prints the summary table with
//! distribution-free median confidence intervals.
//!
//! Run with `cargo run --release --example bratu_benchmark [draws]`.
//! Default 20 draws; the full study uses 100.

use aarelax::bench::{
    default_tau_grid, performance_profile, run_experiment, summarize, AlgoSpec, ExperimentPlan,
    ProfileMetric,
};
use aarelax::problems::ProblemSpec;
use aarelax::relax::{RelaxConfig, Relaxation};

fn algo(strategy: Relaxation, m: usize, composite: bool, period: usize) -> AlgoSpec {
    AlgoSpec {
        strategy,
        relax: RelaxConfig { period, ..RelaxConfig::default() },
        composite,
        m: Some(m),
        label: None,
    }
}

fn main() {
    let draws: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("draws must be a positive integer"))
        .unwrap_or(20);

    let plan = ExperimentPlan {
        problem: ProblemSpec::Bratu { grid_n: 50, lambda: 6.0 },
        algorithms: vec![
            algo(Relaxation::Opt1, 32, false, 1),
            algo(Relaxation::Opt1, 16, false, 4),
            algo(Relaxation::Opt1, 16, false, 16),
            algo(Relaxation::Md, 32, false, 1),
            algo(Relaxation::Md, 32, true, 1),
            algo(Relaxation::Constant(1.0), 64, false, 1),
            algo(Relaxation::Constant(0.5), 32, false, 1),
            algo(Relaxation::Constant(1.0), 64, true, 1),
            algo(Relaxation::Constant(0.5), 32, true, 1),
        ],
        m_grid: vec![],
        draws,
        tol: None,
        max_maps: 10_000,
        seed_base: 0,
    };

    eprintln!("running {} draws x {} algorithms ...", plan.draws, plan.algorithms.len());
    let records = run_experiment(&plan).expect("plan validates");

    println!(
        "{:12} {:>3} {:>13} {:>13} {:>6}",
        "algo", "m", "iters 90% CI", "maps 90% CI", "conv"
    );
    for row in summarize(&records, 0.9) {
        let fmt = |ci: &Option<aarelax::bench::MedianCi>| match ci {
            Some(c) => format!("[{:.0}, {:.0}]", c.lo, c.hi),
            None => "-".into(),
        };
        println!(
            "{:12} {:>3} {:>13} {:>13} {:>6.2}",
            row.algo,
            row.m,
            fmt(&row.iter_ci),
            fmt(&row.maps_ci),
            row.converged_rate
        );
    }

    // Performance profile on map counts: rho(1) is the fraction of draws an
    // algorithm wins outright, the limit is its overall convergence rate.
    let grid = default_tau_grid();
    let profile = performance_profile(&records, &grid, ProfileMetric::Maps);
    println!("\nprofile rho at tau = 1, 1.25, 2 (metric: maps)");
    for (label, rho) in profile.algos.iter().zip(&profile.rho) {
        let at = |tau: f64| {
            let idx = grid.iter().position(|t| *t >= tau).unwrap();
            rho[idx]
        };
        println!("{:12} {:>6.2} {:>6.2} {:>6.2}", label, at(1.0), at(1.25), at(2.0));
    }
    if profile.excluded_draws > 0 {
        println!("excluded draws (no algorithm converged): {}", profile.excluded_draws);
    }
}
