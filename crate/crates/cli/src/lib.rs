//! Command-line front end: argument parsing, file I/O and exit codes around
//! the `iiot_netsim` library.

mod args;
mod commands;
mod output;

use std::ffi::OsString;

use clap::Parser;
use iiot_netsim::qos::QosError;
use iiot_netsim::queueing::QueueError;
use iiot_netsim::report::ReportError;
use iiot_netsim::rtt::RttError;
use iiot_netsim::sim::SimError;
use thiserror::Error;

pub use args::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid input files.
    #[error("{0}")]
    Invalid(String),
    /// Valid input that cannot be run, such as an unstable queue.
    #[error("{0}")]
    Runtime(String),
    /// A statistical check rejected the model.
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let msg = e.to_string();
        match e {
            SimError::InvalidConfig { .. } => CliError::Invalid(msg),
            SimError::Queue(QueueError::Instability { .. }) => CliError::Runtime(msg),
            SimError::Queue(q) => q.into(),
            SimError::Rtt(r) => r.into(),
            SimError::Report(r) => r.into(),
        }
    }
}

impl From<QueueError> for CliError {
    fn from(e: QueueError) -> Self {
        match e {
            QueueError::InvalidParameter(_) => CliError::Invalid(e.to_string()),
            QueueError::Instability { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<RttError> for CliError {
    fn from(e: RttError) -> Self {
        match e {
            RttError::UnstableHop { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<QosError> for CliError {
    fn from(e: QosError) -> Self {
        match e {
            QosError::NonConvergence(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr as a single `error:` line.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            // clap's message up to the usage block, folded onto one line
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            let line = message.join(" ");
            eprintln!("error: {}", line.strip_prefix("error: ").unwrap_or(&line));
            return EXIT_INVALID;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let text = e.to_string().replace('\n', " ");
            eprintln!("error: {text}");
            e.exit_code()
        }
    }
}
