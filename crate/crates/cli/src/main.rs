//! `frame-lyapunov`: experiment runner for frame and POVM selection.

mod commands;
mod config;
mod tau;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// Exit code for invalid input.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit code for a failed postcondition or recheck.
pub const EXIT_GUARANTEE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn guarantee(message: impl Into<String>) -> Self {
        CliError { code: EXIT_GUARANTEE, message: message.into() }
    }
}

impl From<frame_lyapunov::Error> for CliError {
    fn from(e: frame_lyapunov::Error) -> Self {
        match e {
            frame_lyapunov::Error::GuaranteeViolated { .. } => CliError::guarantee(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "frame-lyapunov", version, about = "Lyapunov-type selection for continuous frames and POVMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// JSON file with the same keys as the flags (kebab-case); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Config,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Set whose frame operator matches a weighted frame operator.
    Select(RunArgs),
    /// Dyadic bisection for a constant weight τ₀ (CSV with --sweep: tau0,eps,error,measure).
    Bisect(RunArgs),
    /// Selection within the measure budget ∫τ dμ.
    Budget(RunArgs),
    /// Countably-valued approximation of a generator frame (CSV: layer,cells,measure).
    Quantize(RunArgs),
    /// Frame bounds (CSV: index,eigenvalue).
    Bounds(RunArgs),
    /// Exhaustive whole-cell halving gap and interleaved selections (CSV: cells,error).
    HalvingGap(RunArgs),
    /// Discrete subset selection (CSV with --sweep: max_norm_sq,effective_max_norm_sq,mean_error).
    Aw(RunArgs),
    /// Selection for an operator-valued density.
    PovmSelect(RunArgs),
    /// Rademacher density probe (CSV: set,measure,error).
    Rademacher(RunArgs),
    /// Moving-average and Rademacher showcases end to end.
    Gallery(RunArgs),
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("FRAME_LYAPUNOV_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::validation(format!("FRAME_LYAPUNOV_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (name, args) = match cli.command {
        Command::Select(a) => ("select", a),
        Command::Bisect(a) => ("bisect", a),
        Command::Budget(a) => ("budget", a),
        Command::Quantize(a) => ("quantize", a),
        Command::Bounds(a) => ("bounds", a),
        Command::HalvingGap(a) => ("halving-gap", a),
        Command::Aw(a) => ("aw", a),
        Command::PovmSelect(a) => ("povm-select", a),
        Command::Rademacher(a) => ("rademacher", a),
        Command::Gallery(a) => ("gallery", a),
    };
    let cfg = match &args.config {
        Some(path) => args.flags.clone().over(Config::load(path)?),
        None => args.flags.clone(),
    };
    let output = commands::dispatch(name, &cfg)?;
    commands::emit(name, &cfg, output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
