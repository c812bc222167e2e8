//! Batch pipelines behind the `retint` binary.
//!
//! Every command writes plot-ready TSV files and one `report.json` into
//! `--out`. Outputs depend only on the data and the configuration, never on
//! `--jobs`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
mod commands;
mod context;
mod output;

use std::path::PathBuf;

pub use args::Cli;
use args::Command;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INSUFFICIENT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] retint::Error),
    #[error("insufficient statistics: {0}")]
    Insufficient(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Insufficient(_) => EXIT_INSUFFICIENT,
        }
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Intervals(a) => commands::intervals(a),
        Command::Conditional(a) => commands::conditional(a),
        Command::Dfa(a) => commands::dfa(a),
        Command::Factors(a) => commands::factors(a),
        Command::Synth(a) => commands::synth(a),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(o) => {
            eprintln!("wrote {} files to {}", o.files.len(), o.out_dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("retint: {e}");
            e.exit_code()
        }
    }
}
