use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rtp_game_cli::output::{print_tables, write_tables};
use rtp_game_cli::{commands, CliError, Format, RunConfig, Table};

#[derive(Parser)]
#[command(version, about = "Consumption games under real-time pricing")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. `--set sigma=0.3`
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Write one file per table into this directory instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// First-slot equilibrium coefficients and closed forms
    Solve,
    /// One time zone, per agent and slot
    Simulate,
    /// Monte Carlo statistics per slot with analytic predictions
    Ensemble,
    /// Ensembles over the values of `sweep_axis`
    Sweep,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.overrides {
        config.apply_override(assignment)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(runs) = cli.runs {
        config.runs = runs;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(cli)?;
    let tables: Vec<Table> = match cli.command {
        Command::Solve => commands::solve(&config)?,
        Command::Simulate => commands::simulate(&config)?,
        Command::Ensemble => commands::ensemble(&config)?,
        Command::Sweep => commands::sweep(&config)?,
    };
    match &cli.out {
        Some(dir) => write_tables(&tables, dir, cli.format),
        None => print_tables(&tables, io::stdout().lock(), cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
