//! Command-line front door for the sensilogit toolkit.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config, DesignConfig, ExploreConfig, FitConfig, SimulateConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "sensilogit", version, about = "Ordinal sensory analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (default: "out" next to the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the cumulative-logit model and run the inference pipeline
    Fit(Common),
    /// Run the simulation concordance study
    Simulate(Common),
    /// Generate a balanced incomplete block design and schedule
    Design(Common),
    /// Exploratory chi-square and correspondence analysis
    Explore(Common),
}

fn out_dir(common: &Common, configured: Option<&PathBuf>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| configured.cloned())
        .unwrap_or_else(|| {
            common
                .config
                .parent()
                .unwrap_or_else(|| std::path::Path::new("."))
                .join("out")
        })
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(common) => {
            let cfg: FitConfig = load_config(&common.config)?;
            let out = out_dir(common, cfg.out.as_ref());
            commands::fit::run(&common.config, &cfg, &out)
        }
        Command::Simulate(common) => {
            let cfg: SimulateConfig = load_config(&common.config)?;
            let out = out_dir(common, cfg.out.as_ref());
            commands::simulate::run(&common.config, &cfg, common.seed, &out)
        }
        Command::Design(common) => {
            let cfg: DesignConfig = load_config(&common.config)?;
            let out = out_dir(common, cfg.out.as_ref());
            commands::design::run(&common.config, &cfg, common.seed, &out)
        }
        Command::Explore(common) => {
            let cfg: ExploreConfig = load_config(&common.config)?;
            let out = out_dir(common, cfg.out.as_ref());
            commands::explore::run(&common.config, &cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sensilogit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
