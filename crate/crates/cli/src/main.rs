//! `mapf-mech`: run a mechanism on one instance, run an experiment campaign
//! from a config file, or check the mechanisms' properties empirically.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 time limit exceeded,
//! 3 property violation. Errors go to standard error as
//! `mapf-mech: error: <kind>: <message>`.

mod batch;
mod common;
mod run;
mod summary;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mapf-mech", version, about = "Strategyproof mechanisms for multi-agent path finding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mechanism on one instance and print the outcome as JSON.
    Run(run::RunArgs),
    /// Run an experiment campaign described by a JSON config.
    Batch(batch::BatchArgs),
    /// Check strategyproofness, individual rationality and oracle agreement.
    Verify(verify::VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(&args),
        Command::Batch(args) => batch::cmd_batch(&args),
        Command::Verify(args) => verify::cmd_verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mapf-mech: error: {e}");
            e.exit_code()
        }
    }
}
