//! `mfcorr`: solve, verify and simulate mean-field teams and games with
//! correlated types.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 when a solver did not
//! find a fixed point or did not converge (a partial report is still
//! written) or when verification refutes the equilibrium.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(&cli) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Incomplete(msg)) => {
            eprintln!("mfcorr: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("mfcorr: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
