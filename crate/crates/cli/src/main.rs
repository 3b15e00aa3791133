//! `penfit`: regularization paths for linear, logistic, and Cox models with
//! per-lambda estimates of the expected number and rate of false
//! selections, plus the selection-rule comparisons and simulation harness
//! from the core library, driven from CSV input.

mod cli;
mod commands;
mod config;
mod errors;
mod fit_io;
mod input;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::Ctx;
use crate::errors::CliResult;
use crate::output::log;

fn run(cli: &Cli) -> CliResult<()> {
    let ctx = Ctx::load(cli.config.as_deref())?;
    if let Some(threads) = ctx.resolve(cli.threads, "threads")? {
        if threads == 0 {
            return Err(errors::CliError::usage("--threads must be at least 1"));
        }
        // Ignore the error from a pool that is already built; the first call
        // wins and later ones would only repeat the same cap.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Fit(cmd) => commands::run_fit(&ctx, cmd),
        Command::Mfdr(cmd) => commands::run_mfdr(&ctx, cmd),
        Command::Cv(cmd) => commands::run_cv(&ctx, cmd),
        Command::Compare(cmd) => commands::run_compare(&ctx, cmd),
        Command::Simulate(cmd) => commands::run_simulate(&ctx, cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error, reported with clap's message but exit code 1.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log(format!("error: {e}"));
            ExitCode::from(e.exit_code())
        }
    }
}
