mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 ok, 2 config error, 3 missing input, 4 construction
/// failure, 5 unsupported case. Stable for CI use.
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MISSING_INPUT: u8 = 3;
pub const EXIT_CONSTRUCTION: u8 = 4;
pub const EXIT_UNSUPPORTED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "decorr",
    about = "Reproducible correlation-decay experiments on chaotic maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an ensemble from the physical measure and write it as CSV.
    Simulate(RunArgs),
    /// Estimate the lag-covariance series of the configured observables.
    Correlate(RunArgs),
    /// Build the return-time tower and write its tail and diameter tables.
    Tower(RunArgs),
    /// Run the verification suite and emit a verdict table.
    Verify(RunArgs),
    /// Print the predicted decay law for a modulus class and system class.
    Predict(PredictArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (flag beats the DECORR_THREADS variable; default 1).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Modulus class: hoelder | exp_log_power | log_poly | lipschitz.
    #[arg(long)]
    pub modulus: String,
    /// Class exponent (hoelder, exp_log_power, log_poly).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Lipschitz constant.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// System class: henon | solenoid.
    #[arg(long)]
    pub system_class: String,
    /// Contraction rate for the henon class (the mixing rate is existential;
    /// supply the empirical fit).
    #[arg(long)]
    pub theta: Option<f64>,
    /// Intermittency exponent for the solenoid class.
    #[arg(long)]
    pub gamma: Option<f64>,
}

/// A command failure with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("DECORR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Correlate(args) => commands::correlate(&args),
        Command::Tower(args) => commands::tower(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Predict(args) => commands::predict(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
