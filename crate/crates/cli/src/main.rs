use std::process::ExitCode;

use clap::Parser;

mod args;
mod manifest;
mod oracle;
mod photocount;
mod uhd;

use args::{Cli, Command};

/// A margin must exceed this to count as a detection.
pub const DETECTION_TOL: f64 = 1e-9;

pub const EXIT_NONCLASSICAL: u8 = 2;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] tightbound::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Lib(tightbound::Error::Usage(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

/// Shortest round-trip form, in exponent notation for very small or large values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// [`num`], empty for `None`.
pub fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Rejects efficiencies outside `(0, 1]` before any work starts.
pub fn check_unit_interval(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must lie in (0, 1], got {x}")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Photocount(a) => photocount::run(a),
        Command::Uhd(a) => uhd::run(a),
        Command::OracleCheck(a) => oracle::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tightbound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
