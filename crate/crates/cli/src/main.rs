mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;

#[derive(Parser)]
#[command(name = "flowroutes", version, about = "Reconstruct route sets from traffic flow and trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario bundle
    Generate(Run),
    /// Reconstruct routes for a bundle
    Reconstruct(Run),
    /// Evaluate a method over trials, or an existing reconstruction
    Evaluate(Run),
}

#[derive(clap::Args)]
struct Run {
    /// JSON config (e.g. a previous manifest.json); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<flowroutes::Error>() {
        Some(flowroutes::Error::NonConvergence { .. }) => EXIT_SOLVER,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let (name, run, action): (_, _, fn(&Params) -> anyhow::Result<()>) = match cli.command {
        Command::Generate(r) => ("generate", r, commands::generate),
        Command::Reconstruct(r) => ("reconstruct", r, commands::reconstruct),
        Command::Evaluate(r) => ("evaluate", r, commands::evaluate_cmd),
    };
    let params = match run.config.as_deref().map(Params::load).transpose() {
        Ok(file) => run.params.over(file.unwrap_or_default()).resolve(name),
        Err(e) => Err(e),
    };
    let params = match params {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match action(&params) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
