//! `lot`: batch runner for tomography experiments on a simulated qubit.

mod compare;
mod config;
mod error;
mod experiments;
mod output;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{check_writable, OutputEntry, Outputs, MANIFEST};
use crate::report::{load_json, ModelReport, TruthRecord};

#[derive(Parser)]
#[command(name = "lot", version, about = "Linear operator tomography experiments on a simulated qubit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding `seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare the predictions of two model reports on circuits with known
    /// survival. Prints the per-circuit table as CSV.
    Compare {
        model_a: PathBuf,
        model_b: PathBuf,
        /// JSON list of `{"circuit": "HS...", "truth": p}`.
        #[arg(long)]
        circuits: PathBuf,
        /// Width of the gate-count buckets in `buckets.csv`.
        #[arg(long, default_value_t = 10)]
        bucket_width: usize,
        /// Also write the tables and a manifest to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    created: String,
    seeds: Seeds,
    threads: Option<usize>,
    config: &'a C,
    outputs: Vec<OutputEntry>,
}

#[derive(Serialize)]
struct Seeds {
    seed: Option<u64>,
    trial_seed: Option<u64>,
}

#[derive(Serialize)]
struct CompareInputs {
    model_a: PathBuf,
    model_b: PathBuf,
    circuits: PathBuf,
    bucket_width: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, threads } => run(&config, out, seed, threads),
        Command::Compare { model_a, model_b, circuits, bucket_width, out, threads } => {
            compare(model_a, model_b, circuits, bucket_width, out, threads)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lot: {e}");
            e.exit_code()
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    match threads {
        None => Ok(()),
        Some(0) => Err(CliError::Validation("--threads must be positive".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Validation(format!("thread pool: {e}")))
        }
    }
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>, threads: Option<usize>) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(dir) = out {
        config.output_dir = dir;
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let device = config.validate()?;
    set_threads(threads)?;
    let dir = config.output_dir.clone();
    let existed = check_writable(&dir)?;
    let outputs = match experiments::run(&config, &device) {
        Ok(o) => o,
        Err(e) => {
            if !existed {
                let _ = std::fs::remove_dir(&dir);
            }
            return Err(e);
        }
    };
    let seeds = Seeds { seed: Some(config.seed), trial_seed: Some(config.trial.seed) };
    finish(&dir, "run", seeds, threads, &config, outputs)
}

fn compare(
    a: PathBuf,
    b: PathBuf,
    circuits: PathBuf,
    bucket_width: usize,
    out: Option<PathBuf>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let model_a: ModelReport = load_json(&a)?;
    let model_b: ModelReport = load_json(&b)?;
    let truth: Vec<TruthRecord> = load_json(&circuits)?;
    set_threads(threads)?;
    let table = compare::compare(&model_a, &model_b, &truth, bucket_width)?;
    if let Some(dir) = &out {
        check_writable(dir)?;
    }
    let header = |h: &[&str]| h.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut outputs = Outputs::default();
    outputs.table("comparison.csv", "per-circuit predictions and absolute errors", &header(&compare::COMPARISON_HEADER), &table.rows)?;
    outputs.table("buckets.csv", "predictions and errors grouped by gate count", &header(&compare::BUCKET_HEADER), &table.buckets)?;
    if let Some(dir) = out {
        let inputs = CompareInputs { model_a: a, model_b: b, circuits, bucket_width };
        let seeds = Seeds { seed: None, trial_seed: None };
        finish(&dir, "compare", seeds, threads, &inputs, outputs)?;
    }
    print_table(&compare::COMPARISON_HEADER, &table.rows)
}

/// Writes the table to stdout; a reader closing the pipe early is not an error.
fn print_table(header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let result = (|| {
        let mut w = csv::Writer::from_writer(std::io::stdout().lock());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok::<_, csv::Error>(())
    })();
    match result {
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe) => Ok(()),
        Err(e) => Err(CliError::Validation(format!("cannot write table: {e}"))),
        Ok(()) => Ok(()),
    }
}

fn finish<C: Serialize>(
    dir: &Path,
    command: &'static str,
    seeds: Seeds,
    threads: Option<usize>,
    config: &C,
    mut outputs: Outputs,
) -> Result<(), CliError> {
    let mut entries = outputs.entries();
    entries.push(OutputEntry { file: MANIFEST.to_string(), description: "this manifest".to_string(), bytes: None });
    let manifest = Manifest {
        tool: "lot",
        version: env!("CARGO_PKG_VERSION"),
        command,
        created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        seeds,
        threads,
        config,
        outputs: entries,
    };
    outputs.json(MANIFEST, "this manifest", &manifest)?;
    outputs.write_all(dir)?;
    Ok(())
}
