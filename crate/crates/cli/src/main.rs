//! `mor`: reduce RLCk netlists, compare models, inspect Hankel singular
//! values and generate synthetic benchmarks.

mod commands;
mod config;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::GenArgs;
use crate::config::RunFlags;

#[derive(Debug, Parser)]
#[command(name = "mor", version, about = "Balanced-truncation model order reduction for RLCk circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce a netlist or matrix bundle and write the ROM, trace and summary.
    Reduce {
        input: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Compare two models over the frequency grid.
    Compare {
        model_a: PathBuf,
        model_b: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Write the Hankel singular values and tail bounds of a model.
    Hsv {
        input: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Generate a synthetic benchmark netlist.
    Gen(GenArgs),
}

/// Exit code 2 for bad input or configuration, 3 for numerical failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<rlck_mor::MorError> for CliError {
    fn from(e: rlck_mor::MorError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reduce { input, flags } => commands::reduce(&input, &flags),
        Command::Compare { model_a, model_b, flags } => commands::compare(&model_a, &model_b, &flags),
        Command::Hsv { input, flags } => commands::hsv(&input, &flags),
        Command::Gen(args) => commands::gen(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
