//! `ipwmed`: estimation and testing of interventional mediation effects for
//! zero-inflated count mediators, plus the simulation harness that
//! reproduces the benchmark study at desk scale.
//!
//! Subcommands: `ingest`, `simulate`, `truth`, `estimate`, `bench`,
//! `sensitivity`. Every command is deterministic given `--seed` and emits
//! the seed in its report; timing goes to stderr only.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use clap::{Parser, Subcommand};
use ipwmed_cli::commands;
use ipwmed_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "ipwmed", version, about = "Weighting-based interventional mediation analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, rarefy, and prevalence-filter a combined CSV.
    Ingest(commands::ingest::IngestArgs),
    /// Generate a synthetic dataset from the benchmark generative model.
    Simulate(commands::simulate::SimulateArgs),
    /// Monte Carlo truth value of the interventional indirect effect.
    Truth(commands::truth::TruthArgs),
    /// Estimate mediation effects on a dataset with bootstrap inference.
    Estimate(commands::estimate::EstimateArgs),
    /// Replicated benchmark: bias, spread, and rejection rate per method.
    Bench(commands::bench::BenchArgs),
    /// Latent-confounder sensitivity sweep (absolute bias per grid point).
    Sensitivity(commands::sensitivity::SensitivityArgs),
}

/// Maps an error to the documented exit codes.
fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Io(_)
        | CoreError::Csv(_)
        | CoreError::MissingColumn(_)
        | CoreError::NonBinary { .. }
        | CoreError::Parse { .. }
        | CoreError::BadMediatorValue { .. }
        | CoreError::RaggedRow { .. }
        | CoreError::Empty(_)
        | CoreError::AllTaxaFiltered { .. }
        | CoreError::RarefactionDepth { .. }
        | CoreError::DegenerateColumn(_) => 2,
        CoreError::Stage { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Truth(args) => commands::truth::run(args),
        Command::Estimate(args) => commands::estimate::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Sensitivity(args) => commands::sensitivity::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
