//! `qkmin`: batch driver for approximate k-minimum finding experiments.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Status;
use config::{Overrides, Task};

#[derive(Parser)]
#[command(name = "qkmin", version, about = "Approximate k-minimum finding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured oracle and write its validation report.
    Validate(Overrides),
    /// Run Monte Carlo trials and write JSONL records plus a summary.
    Run(Overrides),
    /// Sweep n (and optionally k) and fit the query-scaling exponent.
    Sweep(Overrides),
    /// Run the expectation-value application on an instance file.
    AppExpectations(Overrides),
    /// Run the ground-energy application on a spectrum file.
    AppEnergies(Overrides),
}

fn dispatch(command: Command) -> anyhow::Result<Status> {
    match command {
        Command::Validate(o) => commands::validate(o.load()?),
        Command::Run(o) => commands::run(o.load()?),
        Command::Sweep(o) => commands::sweep(o.load()?),
        Command::AppExpectations(o) => {
            let mut c = o.load()?;
            c.algorithm = Task::Expectations;
            commands::run(c)
        }
        Command::AppEnergies(o) => {
            let mut c = o.load()?;
            c.algorithm = Task::Energies;
            commands::run(c)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit code 2 is reserved for invalid oracles.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<qkmin::Error>(), Some(qkmin::Error::InvalidOracle { .. })));
            ExitCode::from(if invalid { Status::Invalid.code() } else { 1 })
        }
    }
}
