//! Command-line front end: tag file formats, result records and the
//! `spadcal` subcommands.

use std::io::{self, Write};

use clap::Parser;
use thiserror::Error;

pub mod commands;
pub mod formats;
pub mod record;

pub use commands::Cli;

/// Exit code for bad arguments or an unusable configuration.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for unreadable, malformed or statistically empty data.
pub const EXIT_DATA: i32 = 3;
/// Exit code when the click rate is outside what a model can explain.
pub const EXIT_SATURATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Format(#[from] formats::FormatError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Core(#[from] spadcal::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use spadcal::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(E::InvalidInput(_) | E::Configuration(_)) => EXIT_USAGE,
            CliError::Core(E::Saturation(_) | E::SignalBelowBackground { .. }) => EXIT_SATURATION,
            _ => EXIT_DATA,
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing its result to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    commands::execute(&cli, out)
}
