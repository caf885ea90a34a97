//! `qbex` — query-by-example similarity toolkit.
//!
//! Subcommands cover the whole pipeline: generate a synthetic dataset
//! (`synth`), train a codeword dictionary (`codebook`), quantize songs into
//! histograms (`quantize`), learn a metric (`train`), run the
//! model-selection experiment (`eval`), rank a database against a query
//! (`query`), and run the unsupervised baselines (`baseline`).
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every command is
//! deterministic given `--seed`; `QBEX_THREADS` caps internal parallelism.

mod commands;
mod config;
mod io_util;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qbex", version, about = "Query-by-example similarity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a planted ground-truth metric.
    Synth(commands::synth::Args),
    /// Extract dynamic-MFCC frames from mono WAV files.
    Features(commands::features::Args),
    /// Train a codeword dictionary over descriptor frames.
    Codebook(commands::codebook::Args),
    /// Quantize songs into top-τ codeword histograms.
    Quantize(commands::quantize::Args),
    /// Train a metric on one dataset (no splits).
    Train(commands::train::Args),
    /// Run the split/grid model-selection experiment.
    Eval(commands::eval::Args),
    /// Rank a database against query vectors.
    Query(commands::query::Args),
    /// Unsupervised baselines.
    #[command(subcommand)]
    Baseline(commands::baseline::Args),
}

fn main() {
    if let Ok(threads) = std::env::var("QBEX_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("qbex: QBEX_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(1);
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };

    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Features(args) => commands::features::run(args),
        Command::Codebook(args) => commands::codebook::run(args),
        Command::Quantize(args) => commands::quantize::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Query(args) => commands::query::run(args),
        Command::Baseline(args) => commands::baseline::run(args),
    };

    match result {
        Ok(()) => {}
        Err(commands::CliError::Usage(message)) => {
            eprintln!("qbex: {message}");
            std::process::exit(1);
        }
        Err(commands::CliError::Data(err)) => {
            // A closed stdout (e.g. piping into `head`) is not an error.
            if err
                .downcast_ref::<std::io::Error>()
                .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
            {
                std::process::exit(0);
            }
            eprintln!("qbex: {err:#}");
            std::process::exit(2);
        }
    }
}
