use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ou_elliptic_cli::{entry, Invocation};

/// Series solutions and Monte Carlo validations for the generalized
/// Ornstein-Uhlenbeck elliptic equation.
#[derive(Parser, Debug)]
#[command(name = "ou-elliptic", version, about)]
struct Cli {
    /// Path to the JSON or TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pipeline to run: solve | verify | simulate | convexity (overrides the
    /// config file).
    #[arg(long)]
    command: Option<String>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file override (default: config output_path, else stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format override: csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Worker thread count (results are identical for any value).
    #[arg(long)]
    workers: Option<usize>,
    /// Print the resolved experiment plan without executing.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let inv = Invocation {
        config: cli.config,
        command: cli.command,
        seed: cli.seed,
        output: cli.output,
        format: cli.format,
        workers: cli.workers,
        dry_run: cli.dry_run,
    };
    match entry(&inv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
