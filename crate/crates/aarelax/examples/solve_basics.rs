//! Accelerates a contractive linear map and compares a few strategies
//! against the plain fixed-point iteration.
//!
//! Run with `cargo run --example solve_basics`.

use aarelax::accel::{solve, SolveOptions};
use aarelax::problems::LinearDiagProblem;
use aarelax::relax::Relaxation;
use nalgebra::DVector;

fn main() {
    // g(x) = x - (Dx - b) with eigenvalues 0.1, 0.2, ..., 1.9: a contraction
    // whose fixed point solves Dx = b.
    let problem = LinearDiagProblem::ramp(19);
    let x0 = DVector::zeros(19);

    let runs = [
        ("picard", Relaxation::Constant(1.0), 0),
        ("aa m=8", Relaxation::Constant(1.0), 8),
        ("aa damped", Relaxation::Constant(0.5), 8),
        ("locally optimal", Relaxation::Opt1, 8),
        ("map distance", Relaxation::Md, 8),
    ];
    println!("{:16} {:>10} {:>6} {:>12}", "strategy", "iterations", "maps", "residual");
    for (name, strategy, m) in runs {
        let opts = SolveOptions { m, ..SolveOptions::default() };
        let report = solve(&problem, &x0, strategy, &opts).expect("valid configuration");
        println!(
            "{:16} {:>10} {:>6} {:>12.3e}",
            name,
            report.iterations,
            report.maps,
            report.residual_trace.last().unwrap()
        );
    }

    let solution = problem.solution();
    println!("\nfixed point (first entries): {:.4}, {:.4}, {:.4}, ...", solution[0], solution[1], solution[2]);
}
