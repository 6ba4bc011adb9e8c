//! `udfp`: backtests, strategy comparisons, synthetic panels and bound checks
//! for factor-tilted Dirichlet universal portfolios.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "udfp", version, about = "Factor-tilted Dirichlet universal portfolios")]
pub struct Cli {
    /// Flat key=value file; command-line flags take precedence over it.
    #[arg(long, global = true, env = "UDFP_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for manager sampling and scoring.
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one factor strategy over a price panel.
    Backtest(BacktestArgs),
    /// Run several factor strategies over the same window.
    Compare(CompareArgs),
    /// Check the closed-form growth inequalities on random instances.
    VerifyBounds(VerifyArgs),
    /// Write a synthetic factor-market price panel.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    /// Long-format CSV with columns date,ticker,price.
    #[arg(long, value_name = "PATH")]
    pub prices: Option<PathBuf>,
    /// Dirichlet managers sampled per period [default: 10000].
    #[arg(long, value_name = "N")]
    pub managers: Option<usize>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// daily or weekly-median [default: weekly-median].
    #[arg(long)]
    pub resample: Option<String>,
    /// Minimum daily observations per ticker [default: 4000].
    #[arg(long, value_name = "DAYS")]
    pub min_history: Option<usize>,
    /// Tickers that ever trade below this are dropped [default: 1.0].
    #[arg(long, value_name = "PRICE")]
    pub min_price: Option<f64>,
    /// EWMA and rolling window length for the Sharpe factor [default: 10].
    #[arg(long)]
    pub span: Option<usize>,
    /// First date of the backtest window (YYYY-MM-DD).
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Last date of the backtest window (YYYY-MM-DD).
    #[arg(long)]
    pub end: Option<NaiveDate>,
    /// Directory for wealth.csv, weights, metrics.txt and manifest.txt [default: udfp-out].
    #[arg(long, value_name = "PATH")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// uniform, size, momentum, sharpe or compound.
    #[arg(long)]
    pub factor: Option<String>,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated factor names, at least two.
    #[arg(long)]
    pub factors: Option<String>,
    #[command(flatten)]
    pub market: MarketArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random instances per suite.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub max_assets: Option<usize>,
    #[arg(long)]
    pub max_periods: Option<usize>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Also check this comma-separated beta vector (testing aid).
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    pub inject_beta: Option<String>,
    /// Write report.txt and manifest.txt here.
    #[arg(long, value_name = "PATH")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub assets: Option<usize>,
    /// Trading days, including the first.
    #[arg(long)]
    pub days: Option<usize>,
    /// single-factor or two-factor.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// CSV path; the manifest is written next to it.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let threads: Option<usize> = config.opt(cli.threads, "threads")?;
    if let Some(k) = threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Backtest(args) => commands::backtest(&args, &config, threads),
        Command::Compare(args) => commands::compare(&args, &config, threads),
        Command::VerifyBounds(args) => commands::verify_bounds(&args, &config),
        Command::Gen(args) => commands::gen(&args, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("udfp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
