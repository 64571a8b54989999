//! Emits the two linear-map convergence traces: locally-optimal relaxation
//! variants and map-distance variants, each against the undamped baseline.
//! One CSV per curve plus a JSON sidecar land in `target/traces/`.
//!
//! Run with `cargo run --example linear_relaxation_traces`.

use std::fs;
use std::io::Write;
use std::path::Path;

use aarelax::figures::{trace_linear_aamd, trace_linear_aaopt, write_trace_csv, FigureData};

fn emit(dir: &Path, data: &FigureData) -> std::io::Result<()> {
    for set in &data.sets {
        let path = dir.join(format!("{}_{}.csv", data.figure, set.label));
        let mut file = fs::File::create(&path)?;
        write_trace_csv(&mut file, set)?;
        println!(
            "{:40} iters={:<4} maps={:<4} converged={}",
            path.display(),
            set.iterations,
            set.maps,
            set.converged
        );
    }
    let meta = dir.join(format!("{}_meta.json", data.file_stem()));
    let mut file = fs::File::create(&meta)?;
    writeln!(file, "{}", serde_json::to_string_pretty(data).expect("serializable"))?;
    println!("{:40} sidecar", meta.display());
    Ok(())
}

fn main() -> std::io::Result<()> {
    let dir = Path::new("target/traces");
    fs::create_dir_all(dir)?;

    let aaopt = trace_linear_aaopt(8).expect("valid figure configuration");
    emit(dir, &aaopt)?;

    let aamd = trace_linear_aamd(8).expect("valid figure configuration");
    emit(dir, &aamd)?;

    println!("\nEach CSV holds k,residual,norm,beta rows; beta is empty on the");
    println!("initial point and on the final converged iterate.");
    Ok(())
}
