//! `cellcast`: generate panels, build covariates, train, forecast, evaluate
//! and run the horizon sweep from one TOML config.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

/// Thread count for parallel sections; unset means one thread.
const THREADS_VAR: &str = "CELLCAST_THREADS";

#[derive(Parser)]
#[command(
    name = "cellcast",
    version,
    about = "Cell traffic forecasting with LMA covariates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; every section is optional.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set train.epochs=5`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic panel to `io.panel`.
    Generate(Common),
    /// Export LMA covariates of the training range to `io.covariates`.
    Covariates(Common),
    /// Train on the training range and save to `io.model`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train plain DeepAR without covariates.
        #[arg(long)]
        no_lma: bool,
    },
    /// Sample forecasts from `io.model` into `io.forecast_dir`.
    Forecast(Common),
    /// Score a point-forecast CSV against the held-out days.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Point forecasts; defaults to `<io.forecast_dir>/points.csv`.
        #[arg(long)]
        forecast: Option<PathBuf>,
    },
    /// Train and score every configured model over the configured steps.
    Sweep(Common),
}

fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| {
                CliError::Validation(format!("{THREADS_VAR}: `{v}` is not a positive integer"))
            })?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_VAR}: {e}")))
}

fn run(cli: Cli) -> Result<String, CliError> {
    init_threads()?;
    let load = |c: &Common| RunConfig::load(c.config.as_deref(), &c.overrides);
    match cli.command {
        Command::Generate(c) => commands::generate(&load(&c)?),
        Command::Covariates(c) => commands::covariates(&load(&c)?),
        Command::Train { common, no_lma } => commands::train_model(&load(&common)?, !no_lma),
        Command::Forecast(c) => commands::forecast(&load(&c)?),
        Command::Evaluate { common, forecast } => commands::evaluate(&load(&common)?, forecast),
        Command::Sweep(c) => commands::run_sweep(&load(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
