//! Experiment runner: loads a problem configuration, dispatches a task,
//! and writes machine-readable artifacts. Runs are reproducible for a
//! fixed (config, seed); results do not depend on the thread count.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::json;

use config::RunConfig;
use tasks::TaskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Validate,
    Norms,
    Properties,
    Solve,
    #[value(name = "coercivity-scan")]
    CoercivityScan,
}

impl Task {
    fn name(&self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Norms => "norms",
            Task::Properties => "properties",
            Task::Solve => "solve",
            Task::CoercivityScan => "coercivity-scan",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fracvar", about = "Variable-order fractional Kirchhoff toolkit runner")]
struct Args {
    /// Problem configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Task to run.
    #[arg(long, value_enum)]
    task: Task,
    /// Seed for all randomized pieces of the task.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (0 = library default). Results are identical for
    /// any value.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let started = Instant::now();

    if args.threads > 0 {
        // ignore failures: the global pool may already exist in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global();
    }

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("cannot create output directory: {e}");
        return ExitCode::from(2);
    }

    let outcome = run(&args);
    let wall_ms = started.elapsed().as_millis() as u64;

    let (status, code, artifacts, results, error) = match outcome {
        Ok(out) => ("ok", 0u8, out.artifacts, out.results, None),
        Err(e) => {
            let (status, code) = match &e {
                TaskError::Config(_) => ("config_error", 2),
                TaskError::ValidationFailed(_) => ("validation_failed", 3),
                TaskError::Stall(_) => ("solver_stall", 4),
                TaskError::Io(_) => ("io_error", 2),
            };
            eprintln!("{}", e);
            (status, code, Vec::new(), json!(null), Some(e.to_string()))
        }
    };

    let summary = json!({
        "status": status,
        "task": args.task.name(),
        "seed": args.seed,
        "threads": args.threads,
        "wall_time_ms": wall_ms,
        "artifacts": artifacts,
        "results": results,
        "error": error,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Err(e) = std::fs::write(args.out.join("summary.json"), text + "\n") {
        eprintln!("cannot write summary: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

fn run(args: &Args) -> Result<tasks::TaskOutput, TaskError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| TaskError::Config(format!("{}: {e}", args.config.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| TaskError::Config(e.to_string()))?;
    match args.task {
        Task::Validate => tasks::run_validate(&cfg, args.seed, &args.out),
        Task::Norms => tasks::run_norms(&cfg, args.seed, &args.out),
        Task::Properties => tasks::run_properties(&cfg, args.seed, &args.out),
        Task::Solve => tasks::run_solve(&cfg, args.seed, &args.out),
        Task::CoercivityScan => tasks::run_coercivity_scan(&cfg, args.seed, &args.out),
    }
}
