//! `thinfilm` command-line driver.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys are
//! the long option names with dashes replaced by underscores. Precedence
//! is: values in the config file, then flags given on the command line,
//! then built-in defaults.
//!
//! Exit codes: 0 on success (and, for `check`, `rates` and `crossval`,
//! when every criterion passed), 1 on a domain failure, 2 on a usage
//! error.

mod commands;
mod opts;

use std::process::ExitCode;

use clap::Parser;

use crate::opts::{Cli, Command};

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or configuration values.
    Usage(String),
    /// The computation ran and failed, or a file could not be processed.
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl From<thinfilm::Error> for CliError {
    fn from(e: thinfilm::Error) -> Self {
        match e {
            thinfilm::Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

/// Outcome of a subcommand that ran to completion.
pub enum Outcome {
    /// Every check passed, or there was nothing to check.
    Pass,
    /// The command completed but at least one criterion failed.
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(o) => commands::simulate(o),
        Command::Check(o) => commands::check(o),
        Command::Rates(o) => commands::rates(o),
        Command::W2(o) => commands::w2(o),
        Command::Crossval(o) => commands::crossval(o),
        Command::Resume(o) => commands::resume(o),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Domain(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
