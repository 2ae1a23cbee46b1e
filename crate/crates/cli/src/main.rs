use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vseed_cli::config::RunMode;

#[derive(Parser)]
#[command(name = "vseed", version, about = "Channel flow with slip-with-friction walls and oscillating wall flux")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode named in the config
    Run { config: PathBuf },
    /// Validate a config and list advisories without running anything
    Validate { config: PathBuf },
    /// Run the delta sweep of a config regardless of its mode
    Sweep { config: PathBuf },
    /// Re-check the manifest hashes of a finished run directory
    Audit { rundir: PathBuf },
}

fn main() -> ExitCode {
    let status = match Cli::parse().command {
        Command::Run { config } => vseed_cli::run_file(&config, None),
        Command::Validate { config } => vseed_cli::validate_file(&config),
        Command::Sweep { config } => vseed_cli::run_file(&config, Some(RunMode::Sweep)),
        Command::Audit { rundir } => vseed_cli::audit(&rundir),
    };
    ExitCode::from(status as u8)
}
