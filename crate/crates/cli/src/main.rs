use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use sdd_dp_cli::{run, CliError, CommandName, ExperimentConfig, OutputFormat, Overrides};

/// Solvers for dynamic programs with state-dependent discounting.
#[derive(Parser)]
#[command(name = "sdd-dp", version, about)]
struct Cli {
    /// Experiment to run
    command: CommandName,
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Artifact destination (defaults to the config's output.path, else stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format where the command supports both
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Solver tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// Seed override for seeded commands
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        out: cli.out,
        format: cli.format,
        tol: cli.tol,
        seed: cli.seed,
        threads: cli.threads,
    };
    match execute(cli.command, &cli.config, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(
    command: CommandName,
    config_path: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let outcome = run(command, &config, overrides)?;
    for line in &outcome.certificates {
        eprintln!("{line}");
    }
    match &outcome.path {
        Some(path) => eprintln!("wrote {}", path.display()),
        None => print!("{}", outcome.payload),
    }
    Ok(())
}
