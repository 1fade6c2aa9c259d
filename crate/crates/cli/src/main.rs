//! `scelo`: rate players from game-record files, run the tournament
//! simulator, and small conversion tools.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage or invalid parameter, 3 unreadable
//! input, 4 non-convergence, 5 value outside a validity range.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "scelo", version, about = "Self-consistent Elo, batch and least-squares ratings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One rating period of incremental updates for every player in a file.
    Rate(RateArgs),
    /// Fit all ratings of a tournament at once.
    Fit(FitArgs),
    /// Generate a synthetic era-based tournament and its truth table.
    Simulate(SimulateArgs),
    /// Compare a fit report with a simulator truth file.
    Eval(EvalArgs),
    /// Single-value conversions and calculators.
    #[command(subcommand)]
    Tools(Tool),
}

#[derive(Args)]
struct InputArgs {
    /// Game-record CSV file.
    records: PathBuf,
    /// TOML priors: `player` or `player/role` = { mu = .., sigma = .. } (or k).
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Score margins: off, rms:FRACTION or fixed:DELTA. Anything but off
    /// compares raw scores within (scenario, role) cells.
    #[arg(long, default_value = "off")]
    margin: String,
    /// Convergence tolerance in Elo points.
    #[arg(long, env = "SCELO_TOL", default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Write the JSON report here.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum RateMethod {
    Classic,
    Sc,
    ScFlat,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "sc")]
    method: RateMethod,
    /// K factor for every non-anchored player, overriding the priors.
    #[arg(long)]
    k: Option<f64>,
    /// Rate each (player, role) separately.
    #[arg(long)]
    roles: bool,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum Fitter {
    Pml,
    Lls,
    LlsWeighted,
}

#[derive(Clone, Copy, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
enum Moments {
    Approx,
    Numeric,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "pml")]
    fitter: Fitter,
    /// Split players by role and add a side-advantage decomposition.
    /// Takes `FIRST,SECOND`; inferred when the records use exactly two roles.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    roles: Option<String>,
    /// Shift the fitted ratings to this mean (default 1000 for lls).
    #[arg(long)]
    target_mean: Option<f64>,
    /// Pseudo-games added to each side of every pairing for lls.
    #[arg(long, default_value_t = 0.1)]
    prior_weight: f64,
    #[arg(long, value_enum, default_value = "approx")]
    moments: Moments,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML simulator config; defaults reproduce the 10-era, 40,000-game run.
    config: Option<PathBuf>,
    #[arg(long, env = "SCELO_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "records.csv")]
    records: PathBuf,
    #[arg(long, default_value = "truth.csv")]
    truth: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON report from `scelo fit`.
    report: PathBuf,
    /// Truth CSV from `scelo simulate`.
    truth: PathBuf,
}

#[derive(Subcommand)]
enum Tool {
    /// ECF rating gap to Elo advantage (or back with --to-ecf).
    ConvertEcf {
        #[arg(allow_hyphen_values = true)]
        value: f64,
        #[arg(long)]
        to_ecf: bool,
    },
    /// Games needed to resolve an advantage at a number of standard deviations.
    SampleSize { advantage: f64, k_sigma: f64 },
    /// Risk-averse stake on an outcome with probability p and payout ratio r.
    Bet {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        /// Amount whose loss hurts twice as much as its gain helps.
        #[arg(long, conflicts_with = "curvature", required_unless_present = "curvature")]
        pain: Option<f64>,
        #[arg(long)]
        curvature: Option<f64>,
    },
    /// Single rating equivalent to a mix of ratings against one opponent.
    EloAverage {
        #[arg(allow_hyphen_values = true)]
        opponent: f64,
        #[arg(required = true, allow_hyphen_values = true)]
        ratings: Vec<f64>,
    },
    /// Rating gain of a population as a fixed probe player's win rate against it
    /// moves from p1 to p2.
    PopulationShift { p1: f64, p2: f64 },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate(a) => commands::rate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Eval(a) => commands::eval(a),
        Command::Tools(t) => commands::tool(t),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
