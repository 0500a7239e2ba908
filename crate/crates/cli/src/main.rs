mod commands;
mod config;
mod system;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Settings};

#[derive(Debug)]
pub enum CliError {
    /// Bad input, detected before or instead of computing: exit 2.
    Config(String),
    /// A numerical failure: exit 3.
    Numerical(String),
}

impl From<pwavg::Error> for CliError {
    fn from(e: pwavg::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn emit(settings: &Settings, csv: &str) -> Result<(), CliError> {
    match &settings.out {
        Some(path) => {
            fs::write(path, csv).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Numerical(format!("cannot write to stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::from_cli(cli)?;
    let output = commands::run(&settings)?;
    emit(&settings, &output.csv)?;
    match output.failure {
        Some(reason) => Err(CliError::Numerical(reason)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("pwavg: config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("pwavg: numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
