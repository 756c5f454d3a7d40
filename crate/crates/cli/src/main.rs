//! `rmgp`: eigenpairs, kernels, fitting and sampling for GPs on manifolds.
//!
//! Exit codes: 0 success, 1 check failure, 2 input error, 3 numerical failure.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod checks;
mod commands;
mod config;
mod io;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// Prefixes the message with `what`, keeping the exit code.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<rmgp_core::Error> for CliError {
    fn from(e: rmgp_core::Error) -> Self {
        use rmgp_core::Error as E;
        match e {
            E::Numerical(_) | E::Indefinite(_) | E::OptimizerAborted(_) | E::DegenerateWeights => {
                CliError::numerical(e.to_string())
            }
            _ => CliError::input(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rmgp", version, about = "Gaussian processes on compact Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute (or load from cache) the mesh eigenpairs and print them.
    Eigen(Common),
    /// Evaluate k(x, x2), or the Gram matrix of the points in --grid.
    Kernel {
        x: Option<String>,
        x2: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit hyperparameters by maximizing the log marginal likelihood.
    Fit(Common),
    /// Draw prior or posterior sample paths.
    Sample(Common),
    /// Posterior mean and variance.
    Predict(Common),
    /// Run the built-in invariant checks.
    Check(Common),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recompute mesh eigenpairs even when a cache exists.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub count: Option<usize>,
    /// Sample from the posterior instead of the prior.
    #[arg(long)]
    pub posterior: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Point list (`point` header) used for Gram matrices, samples and predictions.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Hold a hyperparameter fixed during fitting: sigma2, kappa or noise.
    #[arg(long)]
    pub fix: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Spectral,
    Closed,
    Periodic,
    Naive,
}

impl std::str::FromStr for ModeArg {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        <ModeArg as ValueEnum>::from_str(s, false).map_err(|_| {
            CliError::input(format!("unknown mode {s:?}; expected spectral, closed, periodic or naive"))
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eigen(c) => commands::eigen(&c),
        Command::Kernel { x, x2, common } => commands::kernel(&common, x.as_deref(), x2.as_deref()),
        Command::Fit(c) => commands::fit(&c),
        Command::Sample(c) => commands::sample(&c),
        Command::Predict(c) => commands::predict(&c),
        Command::Check(c) => checks::run(&c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
