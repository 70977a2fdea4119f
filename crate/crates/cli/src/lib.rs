//! Batch experiment runner for extreme Kaplan-Meier integrals.
//!
//! Every subcommand writes one CSV (default) or JSON file; CSV files start
//! with a `#` header line echoing the version, seed and parameters.

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use thiserror::Error;

mod args;
mod commands;
mod figures;
pub mod grid;
mod output;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Data(e.to_string())
            }
        })*
    };
}

data_errors!(
    extkm::sample::SampleError,
    extkm::km::KmError,
    extkm::estimators::EstimatorError,
    extkm::simulation::SimulationError,
    extkm::tail::TailError,
    std::io::Error,
    csv::Error,
    serde_json::Error
);

/// Caps the global thread pool from `EXTKM_THREADS`; a pool built earlier
/// in the process is kept.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("EXTKM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("EXTKM_THREADS must be a positive integer, got '{v}'")))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn print_help_for(argv: &[OsString]) {
    let mut cmd = Cli::command();
    let sub = argv.get(1).and_then(|a| a.to_str()).map(str::to_string);
    let help = match sub.and_then(|s| cmd.find_subcommand_mut(&s).cloned()) {
        Some(mut c) => c.render_help(),
        None => cmd.render_help(),
    };
    eprintln!("\n{help}");
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => {
                    print_help_for(&argv);
                    EXIT_USAGE
                }
            };
        }
    };
    match configure_threads().and_then(|_| commands::execute(cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("extkm: {e}");
            e.exit_code()
        }
    }
}
