//! `nehari`: batch runs of the eigenvalue, Nehari-branch and oracle
//! computations, with CSV output.
//!
//! Exit codes: 0 success, 2 config error, 3 branch empty, 4 non-convergence,
//! 5 oracle failure, 1 anything else (I/O).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nehari_core::{Error, Execution};

use crate::commands::{Run, DEFAULT_SEED};
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "nehari", version, about = "Nehari-manifold experiments for a fractional p-Laplacian on (-1, 1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Permit `|λ - λ₁| / λ₁` below the proximity cap.
    #[arg(long, global = true)]
    allow_near_lambda1: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Principal eigenpair, and the `{b > 0}` eigenvalue for sign-changing `b`.
    Eigen,
    /// Branch minimizers for each configured `λ` and branch.
    Solve,
    /// Branch infima over the `λ` list.
    Sweep,
    /// Fibering map of one function on a 200-point `t` grid.
    FiberDump,
    /// Oracle suite.
    Check,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    BranchEmpty(String),
    NotConverged(String),
    Oracle(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::BranchEmpty(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Oracle(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::BranchEmpty(m) => write!(f, "branch empty: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Oracle(m) => write!(f, "oracle failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_)
            | Error::Precondition(_)
            | Error::GridMismatch { .. }
            | Error::NonFinite { .. }
            | Error::OutsideDomain(_)
            | Error::ZeroFunction
            | Error::NoCriticalScaling(_) => CliError::Config(msg),
            Error::BranchEmpty(_) => CliError::BranchEmpty(msg),
            Error::EigenNotConverged { .. }
            | Error::BranchNotConverged { .. }
            | Error::Unbounded(_)
            | Error::NoWitness(_) => CliError::NotConverged(msg),
            Error::Oracle(_) => CliError::Oracle(msg),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match (&cli.config, cli.command) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Command::Check) => RunConfig::parse(
            r#"{"p": 2, "alpha": 0.25, "beta": 1.5, "n": 16, "b": {"preset": {"name": "pos-core", "params": [0.2]}}}"#,
        )?,
        (None, _) => return Err(CliError::Config("--config is required for this command".into())),
    };
    let threads = cli.threads.or(config.threads);
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io(format!("{}: {e}", cli.out.display())))?;
    let r = Run {
        seed: cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        allow_near_lambda1: cli.allow_near_lambda1 || config.allow_near_lambda1,
        execution: if threads == Some(1) { Execution::Sequential } else { Execution::Parallel },
        out: cli.out,
        config,
    };
    match cli.command {
        Command::Eigen => r.eigen(),
        Command::Solve => r.solve(),
        Command::Sweep => r.sweep(),
        Command::FiberDump => r.fiber_dump(),
        Command::Check => r.check(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nehari: {e}");
            ExitCode::from(e.code())
        }
    }
}
