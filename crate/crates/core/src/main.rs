use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use critheat::config::ExperimentConfig;
use critheat::experiments::{run_experiment, write_outputs, Experiment};
use critheat::Error;

/// Numerical experiments for the energy-critical heat equation on the 4-torus.
#[derive(Debug, Parser)]
#[command(name = "critheat", version)]
struct Cli {
    experiment: Experiment,
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for series.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; falls back to CRITHEAT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, String> {
    let n = match (cli.threads, std::env::var("CRITHEAT_THREADS")) {
        (Some(n), _) => n,
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map_err(|_| format!("CRITHEAT_THREADS = {v}: not a thread count"))?,
        (None, Err(_)) => return Ok(None),
    };
    if n == 0 {
        return Err("thread count must be at least 1".into());
    }
    Ok(Some(n))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match thread_count(&cli) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let config = match ExperimentConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(2);
    }
    let outcome = match run_experiment(cli.experiment, &config) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.experiment.name());
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&cli.out, cli.experiment, &config, &outcome) {
        eprintln!("error: writing {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    println!(
        "{}: {}",
        cli.experiment.name(),
        if outcome.passed { "pass" } else { "FAIL" }
    );
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
