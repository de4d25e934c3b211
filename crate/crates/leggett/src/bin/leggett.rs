use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leggett::config::Overrides;
use leggett::ExitStatus;

/// Leggett-model simulation, bounds and feasibility certification.
#[derive(Parser)]
#[command(name = "leggett", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Candidate atoms in the certification grid.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long = "k-sigma", global = true)]
    k_sigma: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Check -1 + |A+B| = AB = 1 - |A-B| for all four outcome pairs.
    IdentityCheck,
    /// Monte Carlo correlations against the averaged bounds.
    Simulate,
    /// Exact averaged bounds per settings pair.
    Bounds,
    /// CHSH values for the singlet and an optional model.
    Chsh,
    /// Certify (in)feasibility of targets on a finite grid.
    Certify,
    /// Re-check a saved certificate against a saved problem.
    Verify,
    /// Search a settings family for the largest certified margin.
    Optimize,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::IdentityCheck => "identity-check",
            Self::Simulate => "simulate",
            Self::Bounds => "bounds",
            Self::Chsh => "chsh",
            Self::Certify => "certify",
            Self::Verify => "verify",
            Self::Optimize => "optimize",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::ConfigError.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let overrides =
        Overrides { seed: cli.seed, output: cli.output, samples: cli.samples, grid: cli.grid, k_sigma: cli.k_sigma };
    match leggett::commands::run_with(cli.command.name(), cli.config.as_deref(), &overrides) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::from(out.status.code() as u8)
        }
        Err(e) => {
            eprintln!("leggett: {e}");
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}
