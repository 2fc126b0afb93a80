//! `hsgd`: experiment runner for holder-sgd.
//!
//! Exit codes: 0 success, 1 a check failed (or every seed diverged), 2 usage
//! or configuration error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "hsgd",
    version,
    about = "SGD experiments with Hölder-smooth and PL certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed and write traces, the aggregate and metadata.
    Run(RunArgs),
    /// Probe the objective's certificates and write verify.json.
    Verify(VerifyArgs),
    /// Fit a power law to an aggregate and report the bound ratio.
    Fit(FitArgs),
    /// Run the cartesian product of the `[sweep]` table, one directory per cell.
    Sweep(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `a..b` (inclusive) or `s1,s2,…`; overrides `seeds`.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FitArgs {
    /// Path to an aggregate.json written by `run`.
    aggregate: PathBuf,
    /// Iteration window `lo,hi`; defaults to every checkpoint.
    #[arg(long, value_parser = parse_window)]
    window: Option<(u64, u64)>,
    #[arg(long, value_enum, default_value_t = Axis::Iteration)]
    axis: Axis,
    #[arg(long, value_enum, default_value_t = Metric::MinPrefix)]
    metric: Metric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Axis {
    Iteration,
    EtaSum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Metric {
    MinPrefix,
    MeanGradNormSq,
    MeanRisk,
    /// `mean_risk − E*`, using the PL certificate in meta.json.
    ExcessRisk,
}

fn parse_window(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo = a.trim().parse::<u64>().map_err(|e| format!("lo: {e}"))?;
    let hi = b.trim().parse::<u64>().map_err(|e| format!("hi: {e}"))?;
    if lo > hi {
        return Err(format!("empty window {lo} > {hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a.config, a.out.as_deref(), a.seeds.as_deref()),
        Command::Verify(a) => commands::verify(&a.config, a.out.as_deref()),
        Command::Fit(a) => commands::fit(&a.aggregate, a.window, a.axis, a.metric),
        Command::Sweep(a) => commands::sweep(&a.config, a.out.as_deref(), a.seeds.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
