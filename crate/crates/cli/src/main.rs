//! `binassoc`: association parameters for binary contingency tables.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric or convergence error,
//! 4 search found nothing.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use assoc_core::io::{resolve_seed, ErrorReport, OutputFormat, RunConfig};
use assoc_core::param_system::{DEFAULT_LOR_MAX_ITER, DEFAULT_LOR_TOL};
use assoc_core::table::DEFAULT_MAX_K;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_NOT_FOUND: u8 = 4;

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "BINASSOC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "binassoc", version, about = "Parameters of association for 2^k binary tables")]
struct Cli {
    /// Random seed; 0 draws one from entropy (the value used is reported).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: $BINASSOC_THREADS, else all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,

    /// Largest accepted table dimension.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_K)]
    max_k: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Lor,
    Di,
    Ex,
    Bahadur,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a parameter of association on a table.
    Params {
        table: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Emit the full parameterization over every margin (lor, di only).
        #[arg(long)]
        full: bool,
    },
    /// Rebuild a table from a full LOR or DI parameterization.
    Reconstruct {
        params: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LOR_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_LOR_MAX_ITER)]
        max_iter: usize,
        /// Also write the bare table file here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check every variable for Simpson's paradox.
    Simpson {
        table: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "lor,di,ex")]
        kind: Vec<KindArg>,
    },
    /// Search random tables for a Simpson's paradox witness.
    Search {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Write the witness table file here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reduce a table to its canonical odds-ratio form, recording each step.
    Canonical { table: PathBuf },
    /// Split a table into zero-DI pair components and single-peak components.
    Decompose { table: PathBuf },
    /// Probability that the sample DI is positive.
    Power {
        /// Sample sizes (comma separated).
        #[arg(long = "N", value_delimiter = ',', required = true)]
        n: Vec<u64>,
        /// Even-cell masses (comma separated).
        #[arg(long, value_delimiter = ',', conflicts_with = "table")]
        p: Vec<f64>,
        /// Take the even-cell mass from a table and sample from it.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Monte Carlo replications per row (0 disables).
        #[arg(long, default_value_t = 0)]
        mc: u64,
    },
    /// Check the zero, monotonicity, swap and conditional-invariance
    /// properties on random tables.
    Battery {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = assoc_core::collapse::DEFAULT_WITNESS_CAP)]
        witnesses: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let (lor_tol, lor_max_iter) = match &cli.command {
        Command::Reconstruct { tol, max_iter, .. } => (*tol, *max_iter),
        _ => (DEFAULT_LOR_TOL, DEFAULT_LOR_MAX_ITER),
    };
    let config = RunConfig {
        seed: resolve_seed(cli.seed),
        threads: rayon::current_num_threads(),
        format: match cli.format {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        },
        lor_tol,
        lor_max_iter,
        max_k: cli.max_k,
    };
    match commands::run(cli.command, &config) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code)
        }
        Err(failure) => {
            let report = ErrorReport::new(&failure.error, i32::from(failure.code));
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("error reports serialize")
            );
            eprintln!("error: {}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
