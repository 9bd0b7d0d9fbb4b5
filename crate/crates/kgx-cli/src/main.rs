//! `kgx` — train knowledge-graph link predictors, explain their predictions
//! with connected subgraphs, distill a subgraph evaluator, and score the
//! explanations.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

mod commands;
mod common;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::common::CliError;

#[derive(Parser)]
#[command(
    name = "kgx",
    version,
    about = "Knowledge-graph link prediction with subgraph explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train an embedding model on a training triple file.
    Pretrain(config::PretrainArgs),
    /// Explain test-fact predictions with key subgraphs.
    Explain(config::ExplainArgs),
    /// Distill a subgraph evaluator from a trained model.
    Distill(config::DistillArgs),
    /// Rank test facts through the evaluator and report explanation metrics.
    Evaluate(config::EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Pretrain(args) => commands::pretrain::run(args),
        Command::Explain(args) => commands::explain::run(args),
        Command::Distill(args) => commands::distill::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
