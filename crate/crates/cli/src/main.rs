//! `bridgesens` command-line interface.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bridgesens::Error;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "bridgesens", version, about = "Bridge-score sensitivity analysis for causal mediation")]
struct Cli {
    /// JSON run config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the working models and write posterior summaries and draws.
    Fit,
    /// Run the configured setting and envelope sweeps.
    Sweep,
    /// Check the identities on seeded random discrete models.
    Verify {
        #[arg(long)]
        models: Option<usize>,
        #[arg(long, hide = true)]
        inject_corrupt: bool,
    },
    /// Write a synthetic dataset and its true effects.
    Simulate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(Error),
    Verification(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Verification(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Verification(_) => 4,
            CliError::Core(e) => match e {
                Error::NumericalFailure(_) | Error::EmptyCollection | Error::ZeroMassStratum(_) => 3,
                _ => 2,
            },
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = Some(out);
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("bridgesens-out"));
    match cli.command {
        Command::Fit => commands::fit(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Verify { models, inject_corrupt } => {
            commands::verify(cfg.seed, models.unwrap_or(cfg.verify_models), inject_corrupt, &out)
        }
        Command::Simulate => commands::simulate(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
