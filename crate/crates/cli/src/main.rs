//! `noisestab`: noise stability computations, optimizer runs and
//! verification reports as reproducible batch jobs.

mod commands;
mod defaults;
mod error;
mod output;
mod source;

use clap::{Args, Parser, Subcommand, ValueEnum};
use defaults::Defaults;
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "noisestab", version, about = "Gaussian and discrete noise stability toolkit")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output directory for report files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian noise stability of a partition over a list of correlations.
    Stability(StabilityArgs),
    /// Discrete noise stability and influences of a voting rule.
    Discrete(DiscreteArgs),
    /// Volume-constrained optimization from a config file.
    Optimize(OptimizeArgs),
    /// Variational identity checks on a partition.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Builtin partition: `halfspace[:d=2,offset=0]` or `cones:m=3[,d=2]`.
    #[arg(long, conflicts_with = "partition")]
    pub builtin: Option<String>,
    /// Partition JSON document.
    #[arg(long)]
    pub partition: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GaussianMethod {
    /// Closed form or quadrature when available, otherwise Monte Carlo.
    Auto,
    Mc,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Correlations, comma separated.
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Vec<f64>,
    #[arg(long, value_enum, default_value_t = GaussianMethod::Auto)]
    pub method: GaussianMethod,
    /// Monte Carlo pairs (default from the defaults file).
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiscreteMethod {
    Exact,
    Mc,
    /// Both estimators, one row each.
    Both,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    /// `plurality`, `majority`, `dictator[:i]` or `constant[:j]` (one-based).
    #[arg(long, conflicts_with = "table")]
    pub rule: Option<String>,
    /// Table rule JSON document.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Candidates.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Voters.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Vec<f64>,
    #[arg(long, value_enum, default_value_t = DiscreteMethod::Exact)]
    pub method: DiscreteMethod,
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Optimizer config, TOML or JSON.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: f64,
    /// Translation direction, comma separated (default: first axis).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let defaults = Defaults::shipped();
    let threads = cli.threads;
    let result = noisestab::par::with_threads(threads, || commands::run(&cli, &defaults));
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(CliError::NotConverged(summary)) => {
            print!("{summary}");
            eprintln!("error: optimizer did not converge; artifacts written to {}", cli.out.display());
            ExitCode::from(5)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
