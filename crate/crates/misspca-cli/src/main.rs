//! Command-line front end: data ingestion, spike fitting, Monte Carlo
//! sweeps, and deviation studies.
//!
//! Every command is deterministic given its inputs and declared seeds.
//! Failures print a single `CODE: message` line on standard error and exit
//! with 2 for input or config problems and 3 for runtime or budget
//! problems.

mod deviation;
mod fit;
mod simulate;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "misspca",
    version,
    about = "Sparse principal component estimation from incomplete observations"
)]
struct Cli {
    /// Cap the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the leading sparse principal component of a CSV dataset.
    Fit(fit::FitArgs),
    /// Run a Monte Carlo rate experiment over a grid config.
    Simulate(simulate::SimulateArgs),
    /// Profile the sparse deviation process against its envelope.
    Deviation(deviation::DeviationArgs),
}

/// A command failure: stable machine-readable code, human message, exit
/// status.
pub struct Failure {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl Failure {
    pub fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: 2 }
    }

    pub fn runtime(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), exit: 3 }
    }
}

impl From<misspca::Error> for Failure {
    fn from(err: misspca::Error) -> Self {
        use misspca::Error;
        let (code, exit) = match &err {
            Error::Parse { .. } => ("PARSE", 2),
            Error::Config(_) => ("CONFIG", 2),
            Error::BadConfig(_) => ("BAD_CONFIG", 2),
            Error::BadDelta(_) => ("BAD_DELTA", 2),
            Error::BadSparsityBound { .. } => ("BAD_SBAR", 2),
            Error::BadLambda(_) => ("BAD_LAMBDA", 2),
            Error::BadVector(_) => ("BAD_VECTOR", 2),
            Error::Dimension(_) => ("DIMENSION", 2),
            Error::NotSquare { .. } => ("NOT_SQUARE", 2),
            Error::NotSymmetric { .. } => ("NOT_SYMMETRIC", 2),
            Error::NoSpectralGap { .. } => ("NO_SPECTRAL_GAP", 2),
            Error::PerturbationTooLarge(_) | Error::PerturbationNotOrthogonal(_) => {
                ("BAD_PERTURBATION", 2)
            }
            Error::Io(_) => ("IO", 2),
            Error::EnumerationBudget { .. } => ("BUDGET", 3),
            Error::EigenConvergence { .. } => ("EIGEN_CONVERGENCE", 3),
            Error::GapBelowFloor { .. } => ("ZERO_GAP", 3),
            Error::AllMissing => ("ALL_MISSING", 3),
            Error::NotPsd(_) => ("NOT_PSD", 3),
            Error::SampleTooSmall(_) => ("SAMPLE_TOO_SMALL", 3),
        };
        Self { code, message: err.to_string(), exit }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Self { code: "IO", message: err.to_string(), exit: 2 }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Fails only if a global pool already exists, which cannot happen
        // before the first rayon use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match cli.command {
        Command::Fit(args) => fit::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Deviation(args) => deviation::run(&args),
    };
    if let Err(failure) = result {
        eprintln!("{}: {}", failure.code, failure.message);
        std::process::exit(failure.exit);
    }
}
