//! Command-line front end for generator spectrum estimation.
//!
//! Exit codes: 0 on success, 1 on numerical failure, 2 on invalid input or
//! usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use genspec_core::error::Error;

use config::RunConfig;

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's [output] section).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for batch work (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the base seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(name = "genspec", version, about = "Spectral analysis of Markov generators from trajectory data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate trajectories and write them as CSV files.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit spectral models to trajectory CSV files.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV files to fit.
        trajectories: Vec<PathBuf>,
    },
    /// Score fitted models against a reference spectrum fixture.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the spectral forecast of an observable from a fitted model.
    Forecast {
        #[command(flatten)]
        common: Common,
    },
    /// Compute a reference spectrum by direct discretization of the
    /// generator and save it as a fixture.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> genspec_core::Result<()> {
    let common = match &cli.command {
        Command::Simulate { common }
        | Command::Fit { common, .. }
        | Command::Compare { common }
        | Command::Forecast { common }
        | Command::Oracle { common } => common,
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot configure {jobs} worker threads: {e}")))?;
    }
    let cfg = RunConfig::load(&common.config)?;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Simulate { common } => commands::simulate(&cfg, out, common.seed),
        Command::Fit { trajectories, .. } => commands::fit(&cfg, trajectories, out),
        Command::Compare { .. } => commands::compare(&cfg, out),
        Command::Forecast { .. } => commands::forecast(&cfg, out),
        Command::Oracle { .. } => commands::oracle(&cfg, out),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
