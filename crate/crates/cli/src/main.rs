//! `csvqr`: command-line front end for fitting, forecasting and backtesting.
//!
//! Exit status is 0 on success (solver non-convergence only prints a
//! warning), 2 on usage errors and 3 on data or model errors.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Runtime};
use error::{CliError, CliResult, EXIT_USAGE};

fn init_runtime(rt: &Runtime) -> CliResult<()> {
    let level = match rt.verbose {
        0 => "error",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    if let Some(jobs) = rt.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(format!("--jobs: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest(a) => {
            init_runtime(&a.runtime)?;
            commands::ingest(a)
        }
        Command::Features(a) => {
            init_runtime(&a.runtime)?;
            commands::features(a)
        }
        Command::Fit(a) => {
            init_runtime(&a.runtime)?;
            commands::fit(a)
        }
        Command::Predict(a) => {
            init_runtime(&a.runtime)?;
            commands::predict(a)
        }
        Command::Evaluate(a) => {
            init_runtime(&a.runtime)?;
            commands::evaluate(a)
        }
        Command::Backtest(a) => {
            init_runtime(&a.runtime)?;
            commands::backtest(a)
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_argv(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // --help and --version land here too, with status 0
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
