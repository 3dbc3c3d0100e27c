mod commands;
mod config;
mod failure;
mod provenance;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::*;
use failure::{CliResult, EXIT_USAGE};

/// Multilabel 12-lead ECG classification with gradient-boosted trees.
#[derive(Debug, Parser)]
#[command(name = "ecgboost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic record set
    Synth(SynthArgs),
    /// Featurize a record directory into a feature matrix
    Extract(ExtractArgs),
    /// Repeated two-phase training with validation reports
    Train(TrainArgs),
    /// Predict label probabilities and label sets per record
    Predict(PredictArgs),
    /// Score prediction files against true labels
    Evaluate(EvaluateArgs),
    /// Average phase-one importance over repeated runs
    ImportancePrior(PriorArgs),
    /// Summarize a training report across runs
    Report(ReportArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Extract(a) => extract(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Evaluate(a) => evaluate_cmd(&a).map(|t| print!("{t}")),
        Command::ImportancePrior(a) => importance_prior(&a),
        Command::Report(a) => report(&a).map(|t| print!("{t}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
