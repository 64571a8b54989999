//! Picks the history depth per algorithm from a small sweep: the depth with
//! the lowest 0.75 quantile of wall time wins, counting non-converged runs
//! as infinitely slow.
//!
//! Run with `cargo run --release --example select_depth`.

use aarelax::bench::{run_experiment, select_depth, AlgoSpec, ExperimentPlan};
use aarelax::problems::ProblemSpec;
use aarelax::relax::Relaxation;

fn main() {
    let plan = ExperimentPlan {
        problem: ProblemSpec::Bratu { grid_n: 20, lambda: 6.0 },
        algorithms: vec![
            AlgoSpec::new(Relaxation::Constant(1.0)),
            AlgoSpec::new(Relaxation::Md),
            AlgoSpec::new(Relaxation::Opt1),
        ],
        m_grid: vec![2, 4, 8, 16],
        draws: 8,
        tol: None,
        max_maps: 10_000,
        seed_base: 0,
    };
    eprintln!(
        "sweeping {} algorithms over depths {:?}, {} draws ...",
        plan.algorithms.len(),
        plan.m_grid,
        plan.draws
    );
    let records = run_experiment(&plan).expect("plan validates");

    for choice in select_depth(&records) {
        println!("{}:", choice.algo);
        for (m, q) in &choice.scores {
            let mark = if Some(*m) == choice.chosen_m { "  <- chosen" } else { "" };
            if q.is_finite() {
                println!("  m={:<3} 0.75-quantile time {:>9.3} ms{}", m, q * 1e3, mark);
            } else {
                println!("  m={:<3} 0.75-quantile time       inf{}", m, mark);
            }
        }
    }
    println!("\nTies go to the smaller depth; an algorithm whose every depth");
    println!("failed on every draw selects nothing.");
}
