//! `specshare` — batch experiment driver for quantized power-allocation
//! design under spectrum-sharing constraints.
//!
//! Every command reads a JSON experiment config (see the `config` module for
//! the schema), prints plot-ready CSV to stdout, and optionally mirrors the
//! CSV plus per-run codebook JSON files into `--out`.  Exit codes: 0 on
//! success, 2 on validation errors, 3 on solver non-convergence.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod config;
mod output;
mod run;

use config::Method;

#[derive(Parser)]
#[command(
    name = "specshare",
    version,
    about = "Quantized power-allocation design for underlay spectrum sharing",
    long_about = "Designs transmit-power codebooks for a secondary link sharing M primary bands \
under average-power and average-interference constraints, and benchmarks them against the \
full-CSI optimum. Results are emitted as deterministic plot-ready CSV."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all solve-and-report commands.
#[derive(Args)]
pub(crate) struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for results.csv and codebook JSON files (stdout only when
    /// omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config's sampling seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Parallel sweep workers (default 1; output order is deterministic
    /// either way).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report capacity in bits instead of nats (columns renamed
    /// accordingly).
    #[arg(long)]
    pub bits_capacity: bool,
}

#[derive(Args)]
pub(crate) struct FileArgs {
    /// Codebook JSON produced by a solve command's --out.
    pub codebook: PathBuf,
    /// Directory for boundaries.csv (stdout only when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-CSI benchmark allocation (no quantization).
    Fullcsi(RunArgs),
    /// Trained codebook design via the modified Lloyd iteration.
    Gla(RunArgs),
    /// Fast analytic codebook construction from the stationarity ladder.
    Aqpa(RunArgs),
    /// Feedback-error-aware codebook design (uses the config's q_f).
    Gla2(RunArgs),
    /// Run the config's methods over its P_avg_dB sweep grid.
    Sweep(RunArgs),
    /// Emit (g0, g1) polylines of the decision boundaries of a stored
    /// codebook.
    Boundaries(FileArgs),
    /// Re-check a stored codebook: structure and recorded capacity.
    Verify {
        /// Codebook JSON produced by a solve command's --out.
        codebook: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fullcsi(args) => run::run_single(Method::Fullcsi, args),
        Command::Gla(args) => run::run_single(Method::Gla, args),
        Command::Aqpa(args) => run::run_single(Method::Aqpa, args),
        Command::Gla2(args) => run::run_single(Method::Gla2, args),
        Command::Sweep(args) => run::run_sweep(args),
        Command::Boundaries(args) => run::run_boundaries(args),
        Command::Verify { codebook } => run::run_verify(codebook),
    };
    match result {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}
