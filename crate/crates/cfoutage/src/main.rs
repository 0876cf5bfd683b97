use std::path::PathBuf;
use std::process::ExitCode;

use cfoutage::config::{Experiment, ExperimentSpec};
use cfoutage::error::AppError;
use cfoutage::experiments;
use clap::Parser;

/// Outage-constrained rate selection under unknown interference.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `scenario.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `experiment`.
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<(), AppError> {
    let mut spec = match &args.config {
        Some(p) => ExperimentSpec::from_path(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.scenario.seed = s;
    }
    if let Some(e) = args.experiment {
        spec.experiment = e;
    }
    if let Some(o) = args.out {
        spec.output_dir = o;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(AppError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    }
    eprintln!("{} (config {}, seed {})", spec.experiment.name(), spec.hash(), spec.scenario.seed);
    let report = experiments::run(&spec, &spec.output_dir)?;
    for n in &report.notes {
        println!("{n}");
    }
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
