//! `intertime`: ingest event logs, fit the IP/IT/MK models, compare them,
//! and simulate synthetic data.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "intertime", version, about = "Inter-event time models: ingest, fit, test, simulate")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Worker threads for every parallel stage (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Random seed; overrides `seed` in a simulation config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Offset of local time from UTC, e.g. `+02:00`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub utc_offset: Option<String>,
    /// Output file (ingest) or directory (fit, test, simulate).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cut an event log into daily blocks of waiting times.
    Ingest(commands::ingest::IngestArgs),
    /// Fit models to a sequence file.
    Fit(commands::fit::FitArgs),
    /// Likelihood-ratio tests, ratios and exponent comparison over fits.
    Test(commands::test::TestArgs),
    /// Simulate users from a model configuration.
    Simulate(commands::simulate::SimulateArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global()?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest::run(&cli.global, a),
        Command::Fit(a) => commands::fit::run(&cli.global, a),
        Command::Test(a) => commands::test::run(&cli.global, a),
        Command::Simulate(a) => commands::simulate::run(&cli.global, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
