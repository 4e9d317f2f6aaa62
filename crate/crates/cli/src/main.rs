//! `projerase` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::Config;

/// Command failure, partitioned by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad input schemas, violated preconditions: exit 2.
    Usage(String),
    /// I/O or numerical failure at runtime: exit 1.
    Runtime(String),
}

impl From<projerase::Error> for CliError {
    fn from(e: projerase::Error) -> Self {
        match &e {
            projerase::Error::Invalid(_) | projerase::Error::Parse { .. } => {
                CliError::Usage(e.to_string())
            }
            projerase::Error::Io { .. } | projerase::Error::Numerical(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Generate(a) => commands::generate(a, &config),
        Command::Train(a) => commands::train(a, &config),
        Command::Erase(a) => commands::erase(a, &config),
        Command::Probe(a) => commands::probe(a, &config),
        Command::Mdl(a) => commands::mdl(a, &config),
        Command::Overlap(a) => commands::overlap(a, &config),
        Command::Similarity(a) => commands::similarity(a, &config),
        Command::Downstream(a) => commands::downstream(a, &config),
        Command::Fairness(a) => commands::fairness(a, &config),
        Command::Inspect(a) => commands::inspect(a, &config),
        Command::PcaDump(a) => commands::pca_dump(a, &config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
