//! `ergokit` — analyze block-structured chains from JSON spec files.
//!
//! Exit codes: 0 success, 2 validation failure (bad file or bad chain),
//! 3 numerical failure.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergokit::chain::{ChainSpec, Gi1Chain};
use ergokit::Error;

mod output;
mod run;

#[derive(Parser)]
#[command(
    name = "ergokit",
    version,
    about = "Ergodicity analysis for GI/G/1-type block-structured Markov chains",
    after_help = "ERGOKIT_THREADS caps worker parallelism (the current \
                  implementation is single-threaded and deterministic, so any \
                  cap >= 1 is honored)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ChainArg {
    /// Path to the chain spec JSON file.
    chain: String,
    /// Override the row-sum tolerance used during validation.
    #[arg(long)]
    eps_row: Option<f64>,
    /// Emit machine-readable JSON (errors go to stderr as JSON too).
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a chain spec and report all violations.
    Validate(ChainArg),
    /// Classify ergodicity (strong / geometric / polynomial / ergodic).
    Classify {
        #[command(flatten)]
        chain: ChainArg,
        /// Highest degree probed by the polynomial moment scan.
        #[arg(long, default_value_t = 6)]
        max_degree: u32,
    },
    /// Locate the decay root: smallest z > 1 with a unit Perron root.
    Eta(ChainArg),
    /// Tabulate the Perron root over a z grid as CSV (z, chi, min_Y, max_Y).
    Chi {
        #[command(flatten)]
        chain: ChainArg,
        /// Grid as z0:z1:n (n points inclusive).
        #[arg(long)]
        grid: String,
    },
    /// Build and verify an ergodicity certificate.
    Certificate {
        #[command(flatten)]
        chain: ChainArg,
        /// geometric (drift function) or strong (hitting-time bound).
        #[arg(long)]
        kind: String,
        /// Evaluation point for the geometric certificate (default:
        /// geometric midpoint of the admissible interval).
        #[arg(long)]
        z: Option<f64>,
        /// Levels beyond the exception threshold to verify.
        #[arg(long, default_value_t = 50)]
        verify_levels: usize,
        /// Write the per-level margins CSV here (defaults to stdout after
        /// the certificate).
        #[arg(long)]
        margins_csv: Option<String>,
    },
    /// Truncate, solve the stationary law, and optionally fit the tail.
    Stationary {
        #[command(flatten)]
        chain: ChainArg,
        #[arg(long, default_value_t = 400)]
        levels: usize,
        /// Fit the per-level tail decay.
        #[arg(long)]
        tail_fit: bool,
        /// Degrees for stationary moment partial sums, comma separated.
        #[arg(long, value_delimiter = ',')]
        moments: Vec<u32>,
        /// Write the per-level CSV (level, phase, pi) here (defaults to
        /// stdout after the summary).
        #[arg(long)]
        csv: Option<String>,
    },
    /// Exact hitting-time moment table, optionally Monte Carlo checked.
    Hitting {
        #[command(flatten)]
        chain: ChainArg,
        #[arg(long, default_value_t = 400)]
        levels: usize,
        #[arg(long, default_value_t = 2)]
        lmax: u32,
        /// Monte Carlo sample count for the mean-hitting cross-check.
        #[arg(long)]
        mc: Option<usize>,
        /// Seed for the Monte Carlo cross-check (required with --mc).
        #[arg(long, requires = "mc")]
        seed: Option<u64>,
        /// Start state for the cross-check as level,phase.
        #[arg(long, default_value = "10,0")]
        start: String,
    },
    /// Total-variation distance curve from a point start, as CSV (n, tv).
    TvCurve {
        #[command(flatten)]
        chain: ChainArg,
        /// Initial state as level,phase.
        #[arg(long, default_value = "1,0")]
        init: String,
        #[arg(long, default_value_t = 600)]
        horizon: usize,
        #[arg(long, default_value_t = 400)]
        levels: usize,
    },
    /// Composed document: classification, certificate, stationary tail,
    /// TV curve.
    Report {
        #[command(flatten)]
        chain: ChainArg,
        #[arg(long, default_value_t = 6)]
        max_degree: u32,
        #[arg(long, default_value_t = 400)]
        levels: usize,
        #[arg(long, default_value_t = 600)]
        horizon: usize,
        /// Write the document here instead of stdout.
        #[arg(short, long)]
        out: Option<String>,
    },
}

fn load_chain(arg: &ChainArg) -> Result<Gi1Chain, (u8, String)> {
    let text = std::fs::read_to_string(&arg.chain)
        .map_err(|e| (2u8, format!("cannot read {}: {e}", arg.chain)))?;
    let spec = ChainSpec::from_json(&text).map_err(|e| (2u8, e.to_string()))?;
    Gi1Chain::validate(&spec, arg.eps_row).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        (2u8, lines.join("; "))
    })
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("ERGOKIT_THREADS") {
        if threads.parse::<usize>().map(|n| n == 0).unwrap_or(true) {
            eprintln!("ERGOKIT_THREADS must be a positive integer");
            return ExitCode::from(2);
        }
    }
    let (json, outcome) = run::dispatch(cli);
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            if json {
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": { "exit_code": code, "message": message } })
                );
            } else {
                eprintln!("error: {message}");
            }
            ExitCode::from(code)
        }
    }
}

