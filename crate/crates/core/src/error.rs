use chrono::NaiveDate;
use thiserror::Error;

use crate::simplex::Portfolio;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alpha: {0}")]
    InvalidAlpha(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),

    #[error("invalid relative price: {0}")]
    InvalidRelativePrice(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ensemble has no managers")]
    EmptyEnsemble,

    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("non-positive portfolio return {value} in period {period}")]
    NonPositiveReturn { period: usize, value: f64 },

    #[error("best CRP search stopped after {iterations} iterations with duality gap {gap:e}")]
    NotConverged {
        iterations: usize,
        gap: f64,
        best: Portfolio,
    },

    #[error("insufficient history for {factor} at period {period}: need {need} returns, have {have}")]
    InsufficientHistory {
        factor: &'static str,
        period: usize,
        need: usize,
        have: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing price for {ticker} on {date}")]
    MissingPrice { date: NaiveDate, ticker: String },

    #[error("universe has {0} assets after filtering; at least 2 are required")]
    UniverseTooSmall(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
