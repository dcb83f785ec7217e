//! Command-line front end for `mmbm-core`: JSON configs in, CSV out.
//!
//! Exit codes: 0 on success, 2 for rejected input (config, validation,
//! usage), 1 when a numerical contract fails or `verify` finds a mismatch.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mmbm_core::VariantTag;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("config field `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("config field `{field}`: {source}")]
    Field {
        field: String,
        #[source]
        source: mmbm_core::Error,
    },

    #[error(transparent)]
    Core(#[from] mmbm_core::Error),

    #[error("{what} is not finite")]
    NonFinite { what: String },

    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn invalid(field: &str, message: &str) -> Self {
        CliError::Invalid { field: field.to_string(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Field { source, .. } | CliError::Core(source) if source.is_numerical() => 1,
            CliError::NonFinite { .. } | CliError::VerifyFailed { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mmbm", version, about = "Stationary laws of regulated Markov-modulated Brownian motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model and print the phase distribution and drift.
    Validate(Common),
    /// Print the kernel matrices and regeneration vectors as CSV blocks.
    Solve(Common),
    /// Evaluate the stationary law of the selected variant on the grid.
    Cdf(Common),
    /// Run the flip-flop simulator and print the empirical law.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Append KS and regeneration comparisons against the analytic law.
        #[arg(long)]
        compare: bool,
    },
    /// Run every analytic cross-check; exits 1 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Add this to every entry of K before comparing (harness self-test).
        #[arg(long, hide = true, value_name = "EPS")]
        perturb_k: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    pub config: PathBuf,
    /// Boundary variant, overriding `variant.kind`.
    #[arg(long)]
    pub variant: Option<VariantTag>,
    /// Regeneration timer rate, overriding `analysis.q`.
    #[arg(long)]
    pub q: Option<f64>,
    /// Flip-flop rate, overriding `simulation.lambda`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Seed, overriding `simulation.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write output here instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Diagnostics go to standard error.
pub fn run_command<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let out = match &cli.command {
        Command::Validate(c) | Command::Solve(c) | Command::Cdf(c) => c.out.clone(),
        Command::Simulate { common, .. } | Command::Verify { common, .. } => common.out.clone(),
    };
    let (text, result) = commands::dispatch(&cli.command);
    if let Err(e) = emit(out.as_ref(), &text) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    if text.is_empty() {
        return Ok(());
    }
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "standard output".into(), source })
        }
    }
}
