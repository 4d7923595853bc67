//! Experiment harness CLI.
//!
//! Exit codes: 0 success, 2 configuration error, 3 training divergence.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::*;

/// Weakly-supervised disentanglement experiments.
#[derive(Parser)]
#[command(name = "disent", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground-truth-factor dataset container to disk.
    GenData(GenDataArgs),
    /// Train one model from a TOML config (flags override fields).
    Train(TrainArgs),
    /// Train a grid of configs (betas x seeds x sharing modes).
    Sweep(SweepArgs),
    /// Recompute disentanglement scores for a stored run.
    Evaluate(RecordArgs),
    /// Downstream factor-prediction accuracy for a stored run.
    Downstream(DownstreamArgs),
    /// Covariate-shift generalization for a stored run.
    Shift(ShiftArgs),
    /// Demographic-parity unfairness for a stored run.
    Fairness(FairnessArgs),
    /// Empirical identifiability checks on candidate map families.
    Identifiability(IdentArgs),
    /// Summarize a directory of run records (JSON + CSV + SVG plots).
    Report(ReportArgs),
    /// Pick the run with the best weakly-supervised reconstruction loss.
    Select(SelectArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Train(args) => train(args),
        Command::Sweep(args) => sweep(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Downstream(args) => downstream(args),
        Command::Shift(args) => shift(args),
        Command::Fairness(args) => fairness(args),
        Command::Identifiability(args) => identifiability(args),
        Command::Report(args) => report(args),
        Command::Select(args) => select(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            // configuration problems exit 2, everything else 1
            if err
                .downcast_ref::<disent::exp::ExpError>()
                .is_some_and(|e| matches!(e, disent::exp::ExpError::Config(_)))
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
