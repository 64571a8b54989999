//! Emits convergence traces for the Bratu problem in plain and composite
//! form, one CSV per strategy plus a JSON sidecar, under `target/traces/`.
//!
//! The composite variant wraps every map evaluation in a depth-1
//! inner acceleration, so its curves trade more maps per iteration for
//! fewer iterations.
//!
//! Run with `cargo run --example bratu_traces`.

use std::fs;
use std::io::Write;
use std::path::Path;

use aarelax::figures::{trace_bratu, write_trace_csv, FigureData};

fn emit(dir: &Path, data: &FigureData) -> std::io::Result<()> {
    for set in &data.sets {
        let path = dir.join(format!("{}_{}.csv", data.figure, set.label));
        let mut file = fs::File::create(&path)?;
        write_trace_csv(&mut file, set)?;
        println!(
            "{:44} iters={:<5} maps={:<5} converged={}",
            path.display(),
            set.iterations,
            set.maps,
            set.converged
        );
    }
    let meta = dir.join(format!("{}_meta.json", data.file_stem()));
    let mut file = fs::File::create(&meta)?;
    writeln!(file, "{}", serde_json::to_string_pretty(data).expect("serializable"))?;
    println!("{:44} sidecar", meta.display());
    Ok(())
}

fn main() -> std::io::Result<()> {
    let dir = Path::new("target/traces");
    fs::create_dir_all(dir)?;

    for composite in [false, true] {
        let data = trace_bratu(16, composite).expect("valid figure configuration");
        emit(dir, &data)?;
        println!();
    }
    Ok(())
}
