use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aarelax::accel::{solve, SolveOptions};
use aarelax::bench::{
    performance_profile, run_experiment, select_depth, summarize, write_profile_csv,
    write_runs_csv, write_summary_csv, ExperimentPlan, ProfileMetric,
};
use aarelax::figures::{trace_bratu, trace_linear_aamd, trace_linear_aaopt, write_trace_csv, FigureData};
use aarelax::problems::{generate_admixture, ProblemSpec};
use aarelax::relax::{RelaxConfig, Relaxation};

#[derive(Parser)]
#[command(
    name = "aarelax",
    version,
    about = "Anderson-accelerated fixed-point solver with adaptive relaxation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one accelerated solve and print its report as JSON.
    Solve(SolveArgs),
    /// Run an experiment plan; write summary and profile CSVs.
    Sweep(SweepArgs),
    /// Pilot sweep over the depth grid; print the chosen depth per algorithm.
    SelectM(SelectArgs),
    /// Emit figure trace CSVs with a metadata sidecar.
    Trace(TraceArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Builtin problem (linear | bratu | admixture) or path to a problem
    /// descriptor JSON.
    #[arg(long)]
    problem: String,
    /// Strategy: aa | opt0 | opt0_raw | opt1 | opt1_raw | md | md_noreg |
    /// md_probe_default | md_probe_prev.
    #[arg(long, default_value = "aa")]
    algo: String,
    /// History depth (number of difference pairs kept).
    #[arg(long, default_value_t = 8)]
    m: usize,
    /// Constant relaxation value, and the fallback default of the adaptive
    /// strategies.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Upper cap applied to adaptive relaxation values.
    #[arg(long, default_value_t = 3.0)]
    beta_max: f64,
    /// Recompute period of the locally-optimal mapped strategy.
    #[arg(long = "T", default_value_t = 1)]
    t: usize,
    /// Stability window: a map-distance estimate is trusted only when it
    /// moved less than this since the previous iteration.
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    /// Longest run of above-one estimates tolerated before a reset.
    #[arg(long = "cap-P", default_value_t = 10)]
    cap_p: usize,
    /// Interleave the one-iteration inner acceleration.
    #[arg(long)]
    composite: bool,
    /// Residual tolerance; the problem's conventional value when omitted.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_maps: usize,
    /// Seed for problem generation and random starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Starting point: default | zeros | uniform | comma-separated values.
    #[arg(long, default_value = "default")]
    x0: String,
    /// Write the generated genotype matrix to this CSV path (admixture only).
    #[arg(long)]
    export_genotypes: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Experiment plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for summary.csv and profile.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Confidence level of the median intervals.
    #[arg(long, default_value_t = 0.99)]
    level: f64,
    /// Profile cost metric.
    #[arg(long, value_enum, default_value_t = MetricArg::Time)]
    metric: MetricArg,
    /// Also write the raw per-run records to runs.csv.
    #[arg(long)]
    runs: bool,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// Experiment plan JSON; algorithms without a fixed depth are swept
    /// over the plan's depth grid.
    #[arg(long)]
    plan: PathBuf,
}

#[derive(clap::Args)]
struct TraceArgs {
    /// Figure: linear_aaopt | linear_aamd | bratu.
    #[arg(long)]
    figure: String,
    /// History depth override (figure defaults: 8, 8, 16).
    #[arg(long)]
    m: Option<usize>,
    /// Composite runs (reaction-diffusion figure only).
    #[arg(long)]
    composite: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Time,
    Maps,
}

enum CliError {
    /// Invalid configuration: exit code 2.
    Config(String),
    /// Environment failures (I/O): exit code 1.
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<aarelax::relax::ConfigError> for CliError {
    fn from(e: aarelax::relax::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::SelectM(args) => cmd_select_m(args),
        Cmd::Trace(args) => cmd_trace(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_problem(arg: &str) -> Result<ProblemSpec, CliError> {
    if let Some(spec) = ProblemSpec::builtin(arg) {
        return Ok(spec);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "unknown problem '{arg}'; expected linear, bratu, admixture or a descriptor path"
        )));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid problem descriptor {arg}: {e}")))
}

fn parse_strategy(name: &str, beta: f64) -> Result<Relaxation, CliError> {
    Ok(match name {
        "aa" | "constant" => Relaxation::Constant(beta),
        "opt0" => Relaxation::Opt0,
        "opt0_raw" => Relaxation::Opt0Raw,
        "opt1" => Relaxation::Opt1,
        "opt1_raw" => Relaxation::Opt1Raw,
        "md" => Relaxation::Md,
        "md_noreg" => Relaxation::MdRaw,
        "md_probe_default" => Relaxation::MdProbe { warm_start: false },
        "md_probe_prev" => Relaxation::MdProbe { warm_start: true },
        other => return Err(CliError::Config(format!("unknown strategy '{other}'"))),
    })
}

fn parse_x0(arg: &str, dim: usize, seed: u64, default: DVector<f64>) -> Result<DVector<f64>, CliError> {
    match arg {
        "default" => Ok(default),
        "zeros" => Ok(DVector::zeros(dim)),
        "uniform" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(DVector::from_fn(dim, |_, _| rng.gen_range(0.0..1.0)))
        }
        list => {
            let values: Result<Vec<f64>, _> =
                list.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let values =
                values.map_err(|e| CliError::Config(format!("invalid x0 list: {e}")))?;
            if values.len() != dim {
                return Err(CliError::Config(format!(
                    "x0 has {} entries, problem dimension is {dim}",
                    values.len()
                )));
            }
            Ok(DVector::from_vec(values))
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let spec = load_problem(&args.problem)?;
    let (problem, default_x0) = match (&spec, &args.export_genotypes) {
        (ProblemSpec::Admixture { k, j, n_ind }, export) => {
            let inst = generate_admixture(*k, *j, *n_ind, args.seed);
            if let Some(path) = export {
                let mut file = fs::File::create(path)?;
                inst.problem.write_genotypes_csv(&mut file)?;
            }
            (Box::new(inst.problem) as Box<dyn aarelax::accel::Mapping>, inst.start)
        }
        (_, Some(_)) => {
            return Err(CliError::Config(
                "--export-genotypes applies to the admixture problem only".into(),
            ))
        }
        _ => spec.build(args.seed),
    };
    let strategy = parse_strategy(&args.algo, args.beta)?;
    let x0 = parse_x0(&args.x0, problem.dim(), args.seed, default_x0)?;
    let opts = SolveOptions {
        m: args.m,
        tol: args.tol.unwrap_or_else(|| spec.default_tol()),
        max_maps: args.max_maps,
        composite: args.composite,
        cond_limit: None,
        relax: RelaxConfig {
            beta_default: args.beta,
            beta_max: args.beta_max,
            period: args.t,
            delta: args.delta,
            max_above_one: args.cap_p,
        },
    };
    let report = solve(problem.as_ref(), &x0, strategy, &opts)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn load_plan(path: &Path) -> Result<ExperimentPlan, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read plan {}: {e}", path.display())))?;
    let plan: ExperimentPlan = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid plan {}: {e}", path.display())))?;
    plan.validate()?;
    Ok(plan)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&args.level) {
        return Err(CliError::Config("level must be in [0, 1)".into()));
    }
    let plan = load_plan(&args.plan)?;
    let records = run_experiment(&plan)?;
    fs::create_dir_all(&args.out_dir)?;

    let summary = summarize(&records, args.level);
    let summary_path = args.out_dir.join("summary.csv");
    let mut file = fs::File::create(&summary_path)?;
    write_summary_csv(&mut file, &summary)?;
    println!("wrote {}", summary_path.display());

    let metric = match args.metric {
        MetricArg::Time => ProfileMetric::Time,
        MetricArg::Maps => ProfileMetric::Maps,
    };
    let table = performance_profile(&records, &aarelax::bench::default_tau_grid(), metric);
    let profile_path = args.out_dir.join("profile.csv");
    let mut file = fs::File::create(&profile_path)?;
    write_profile_csv(&mut file, &table)?;
    println!("wrote {}", profile_path.display());
    if table.excluded_draws > 0 {
        println!(
            "note: {} draw(s) excluded from the profile (no algorithm converged)",
            table.excluded_draws
        );
    }

    if args.runs {
        let runs_path = args.out_dir.join("runs.csv");
        let mut file = fs::File::create(&runs_path)?;
        write_runs_csv(&mut file, &records)?;
        println!("wrote {}", runs_path.display());
    }
    Ok(())
}

fn cmd_select_m(args: SelectArgs) -> Result<(), CliError> {
    let plan = load_plan(&args.plan)?;
    let records = run_experiment(&plan)?;
    let choices = select_depth(&records);
    let mut out = std::io::stdout().lock();
    writeln!(out, "algo,m")?;
    for choice in &choices {
        match choice.chosen_m {
            Some(m) => writeln!(out, "{},{}", choice.algo, m)?,
            None => {
                writeln!(out, "{},", choice.algo)?;
                eprintln!(
                    "note: {} never converged at any depth; excluded from selection",
                    choice.algo
                );
            }
        }
    }
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<(), CliError> {
    let figure: FigureData = match args.figure.as_str() {
        "linear_aaopt" => {
            if args.composite {
                return Err(CliError::Config(
                    "--composite applies to the bratu figure only".into(),
                ));
            }
            trace_linear_aaopt(args.m.unwrap_or(8))?
        }
        "linear_aamd" => {
            if args.composite {
                return Err(CliError::Config(
                    "--composite applies to the bratu figure only".into(),
                ));
            }
            trace_linear_aamd(args.m.unwrap_or(8))?
        }
        "bratu" => trace_bratu(args.m.unwrap_or(16), args.composite)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown figure '{other}'; expected linear_aaopt, linear_aamd or bratu"
            )))
        }
    };
    fs::create_dir_all(&args.out_dir)?;
    for set in &figure.sets {
        let path = args.out_dir.join(format!("{}_{}.csv", figure.figure, set.label));
        let mut file = fs::File::create(&path)?;
        write_trace_csv(&mut file, set)?;
        println!("wrote {}", path.display());
    }
    let meta_path = args.out_dir.join(format!("{}_meta.json", figure.file_stem()));
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&figure).expect("figure metadata serializes"),
    )?;
    println!("wrote {}", meta_path.display());
    Ok(())
}
