// SPDX-License-Identifier: Apache-2.0

//! `credrect`: fit correlation posteriors, build credible rectangles, compare
//! groups and recover edge sets from timeseries CSVs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "credrect", version, about = "Credible rectangles for correlation matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
enum Command {
    /// Fit the posterior of a timeseries CSV and write it as JSON.
    Fit(FitArgs),
    /// Build a credible rectangle from a CSV or a posterior JSON.
    Rectangle(RectangleArgs),
    /// Compare two rectangles (JSON) or two groups (CSV).
    Compare(CompareArgs),
    /// Estimate the edge set of a timeseries CSV.
    Support(SupportArgs),
    /// Run the support-recovery benchmark on generated sparse matrices.
    Simulate(SimulateArgs),
    /// Mean interval length over an (n, p, rho) grid of inverse-Wishart posteriors.
    Grid(GridArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct DataArgs {
    /// Rows of the CSV are variables rather than observations.
    #[arg(long)]
    transpose: bool,
    /// Subtract column means before fitting.
    #[arg(long)]
    center: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SamplingArgs {
    /// Rectangle estimator.
    #[arg(long, value_enum, default_value_t = RectMethod::Auto)]
    method: RectMethod,
    /// Number of levels in the sliced grid.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    grid_size: u64,
    /// Posterior draws; defaults depend on the method and dimension.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    /// Fresh draws used to validate the sliced grid.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    validation_samples: u64,
    /// Memory allowed for sliced-grid tail buffers.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    memory_budget_mb: u64,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RectangleArgs {
    /// Timeseries CSV, or a posterior JSON written by `fit`.
    input: PathBuf,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct CompareArgs {
    /// First rectangle JSON or group CSV.
    a: PathBuf,
    /// Second rectangle JSON or group CSV.
    b: PathBuf,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list `i j gained|lost`; the JSON summary goes next to it with
    /// extension `.summary.json`. Edges go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SupportArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Edge-set estimator.
    #[arg(long = "method", value_enum, default_value_t = SupportChoice::BayesOptimal)]
    support_method: SupportChoice,
    /// Draws for the Bayesian estimators.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    validation_samples: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    grid_size: u64,
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
    memory_budget_mb: u64,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list `i j`; the JSON summary goes next to it with extension
    /// `.summary.json`. Edges go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Number of variables.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(2..))]
    p: u64,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 500])]
    n: Vec<usize>,
    /// Target off-diagonal densities, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.024, 0.24, 0.48])]
    density: Vec<f64>,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// Stage 1 draws of the sliced grid; `⌈20 d / α⌉` when absent.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    validation_samples: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    grid_size: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report, with provenance in `<out>.provenance.json`; stdout when
    /// absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 200, 800])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 15, 40])]
    p: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.4, 0.7])]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    /// `bghm` keeps all draws; `sliced-grid` validates a level grid.
    #[arg(long, value_enum, default_value_t = GridMethod::Bghm)]
    method: GridMethod,
    /// Draws per replication (BGHM), or Stage 1 draws (sliced grid, default
    /// `⌈20 d / α⌉`).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: Option<u64>,
    #[arg(long, default_value_t = 20_000, value_parser = clap::value_parser!(u64).range(1..))]
    validation_samples: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    grid_size: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum RectMethod {
    /// BGHM for d ≤ 50, online BGHM for d ≤ 500, sliced grid above.
    Auto,
    Bghm,
    #[value(alias = "online_bghm")]
    OnlineBghm,
    #[value(alias = "sliced", alias = "sliced_grid")]
    SlicedGrid,
    Bonferroni,
    Naive,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum SupportChoice {
    #[value(name = "bayes_optimal", alias = "bayes-optimal")]
    BayesOptimal,
    #[value(name = "bayes_bonferroni", alias = "bayes-bonferroni")]
    BayesBonferroni,
    #[value(name = "mt_bonferroni", alias = "mt-bonferroni")]
    MtBonferroni,
    #[value(name = "mt_holm", alias = "mt-holm")]
    MtHolm,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum GridMethod {
    Bghm,
    #[value(alias = "sliced", alias = "sliced_grid")]
    SlicedGrid,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 1), got {a}"))
    }
}

/// Misuse detected after parsing, e.g. mixing a JSON and a CSV in `compare`.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("credrect: error: {msg}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
