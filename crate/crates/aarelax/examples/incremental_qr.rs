//! Drives the incremental QR mixing engine by hand: a minimal accelerated
//! loop built directly on `MixingState`, showing appends, window drops,
//! condition pruning and the mixed-pair solve.
//!
//! Run with `cargo run --example incremental_qr`.

use aarelax::accel::Mapping;
use aarelax::problems::LinearDiagProblem;
use aarelax::qr_ls::MixingState;
use nalgebra::DVector;

fn main() {
    let problem = LinearDiagProblem::ramp(19);
    let dim = problem.dim();
    // The tight condition ceiling is deliberate: it makes the pruning path
    // visible in a short run.  Production drivers use 1e12 or the problem's
    // own limit.
    let capacity = 5;
    let mut state = MixingState::new(dim, capacity, 10.0);

    let mut x = DVector::zeros(dim);
    let mut g = problem.apply(&x);
    let mut f = &g - &x;

    println!(
        "{:>4} {:>6} {:>12} {:>12}  notes",
        "k", "depth", "residual", "cond(R)"
    );
    for k in 0..20 {
        let mut note = String::new();
        if state.is_full() {
            state.drop_oldest();
            note.push_str("dropped oldest; ");
        }
        let pruned = state.prune_to_condition();
        if pruned > 0 {
            note.push_str(&format!("pruned {pruned}; "));
        }

        let (x_bar, y_bar) = state.solve_mixing(&f, &x, &g).expect("history is well posed");
        let x_next = y_bar.clone();

        let g_next = problem.apply(&x_next);
        let f_next = &g_next - &x_next;
        state
            .append(&f_next - &f, &x_next - &x)
            .expect("finite difference columns");

        println!(
            "{:>4} {:>6} {:>12.3e} {:>12.3e}  {}",
            k,
            state.depth(),
            f.norm(),
            state.cond_estimate(),
            note
        );

        // x_bar is the history-blended iterate the mixed step starts from.
        let _ = x_bar;
        x = x_next;
        g = g_next;
        f = f_next;
        if f.norm() < 1e-10 {
            break;
        }
    }

    // The least-squares coefficients and the equivalent convex weights over
    // the iterate history describe the same mixed point two ways.
    let gamma = state.gamma(&f).expect("non-empty history");
    let alpha = state.alpha_weights(&f).expect("non-empty history");
    println!("\nfinal residual      {:.3e}", f.norm());
    println!("gamma               {:?}", gamma.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("alpha (sums to 1)   {:?}", alpha.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    println!("sum(alpha) = {:.12}", alpha.iter().sum::<f64>());
}
