//! Synthetic daily price panels built from the factor-market generators.

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{Error, Result};
use crate::ingest::PricePanel;
use crate::markets::{gen_single_factor, gen_two_factor, lognormal_factor_returns, FactorExposures, LogNormalFactor};
use crate::simplex::RngStream;
use crate::wealth::RelativePrice;

#[derive(Clone, Debug, PartialEq)]
pub enum FactorModel {
    /// `X = R · β` with a log-normal market return `R`.
    Single { betas: Vec<f64>, market: LogNormalFactor },
    /// `X_j = r1^β1_j · r2^β2_j` with log-normal factor returns.
    Two { betas1: Vec<f64>, betas2: Vec<f64>, factors: [LogNormalFactor; 2] },
}

impl FactorModel {
    pub fn name(&self) -> &'static str {
        match self {
            FactorModel::Single { .. } => "single-factor",
            FactorModel::Two { .. } => "two-factor",
        }
    }

    fn assets(&self) -> usize {
        match self {
            FactorModel::Single { betas, .. } => betas.len(),
            FactorModel::Two { betas1, .. } => betas1.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub model: FactorModel,
    /// Trading days (weekdays) in the panel, including the first.
    pub days: usize,
    pub initial_prices: Vec<f64>,
    pub start: NaiveDate,
    pub seed: u64,
    /// Paths that would dip below this are rescaled so their minimum equals it.
    pub min_price: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `hi, …, lo` geometrically spaced.
fn geomspace(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    linspace(hi.ln(), lo.ln(), n).into_iter().map(f64::exp).collect()
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 8, 1).expect("valid date")
}

impl SyntheticSpec {
    /// Daily single-factor market where exposure rises with asset index and
    /// starting price falls with it, so cheap assets carry the high betas.
    pub fn single_factor(assets: usize, days: usize, seed: u64) -> Self {
        SyntheticSpec {
            model: FactorModel::Single {
                betas: linspace(0.9997, 1.0006, assets),
                market: LogNormalFactor { drift: 0.0003, vol: 0.012 },
            },
            days,
            initial_prices: geomspace(200.0, 5.0, assets),
            start: default_start(),
            seed,
            min_price: 1.0,
        }
    }

    pub fn two_factor(assets: usize, days: usize, seed: u64) -> Self {
        SyntheticSpec {
            model: FactorModel::Two {
                betas1: linspace(0.6, 1.4, assets),
                betas2: linspace(1.0, 0.2, assets),
                factors: [
                    LogNormalFactor { drift: 0.0003, vol: 0.01 },
                    LogNormalFactor { drift: 0.0001, vol: 0.006 },
                ],
            },
            days,
            initial_prices: geomspace(200.0, 5.0, assets),
            start: default_start(),
            seed,
            min_price: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMarket {
    pub panel: PricePanel,
    /// Gross returns the panel was integrated from.
    pub relatives: Vec<RelativePrice>,
}

fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Generates factor returns, integrates them into prices from
/// `initial_prices`, and stamps rows with consecutive weekdays.
pub fn gen_synthetic_market(spec: &SyntheticSpec) -> Result<SyntheticMarket> {
    let m = spec.model.assets();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 assets, got {m}")));
    }
    if spec.days < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 days, got {}", spec.days)));
    }
    if spec.initial_prices.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: spec.initial_prices.len() });
    }
    if let Some(p) = spec.initial_prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::InvalidArgument(format!("initial price {p} is not positive")));
    }
    let periods = spec.days - 1;
    let stream = RngStream::new(spec.seed, 0);
    let relatives = match &spec.model {
        FactorModel::Single { betas, market } => {
            let r = lognormal_factor_returns(&[*market], periods, &stream)?;
            gen_single_factor(&FactorExposures::single(betas.clone())?, r.factor(0))?
        }
        FactorModel::Two { betas1, betas2, factors } => {
            let r = lognormal_factor_returns(factors, periods, &stream)?;
            gen_two_factor(&FactorExposures::two(betas1.clone(), betas2.clone())?, &r)?
        }
    };

    let mut rows = Vec::with_capacity(spec.days);
    rows.push(spec.initial_prices.clone());
    for x in &relatives {
        let prev = rows.last().unwrap();
        let next: Vec<f64> = prev.iter().zip(x.ratios()).map(|(p, r)| p * r).collect();
        rows.push(next);
    }
    for j in 0..m {
        let low = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
        if low < spec.min_price {
            let scale = spec.min_price / low;
            rows.iter_mut().for_each(|r| r[j] = (r[j] * scale).max(spec.min_price));
        }
    }
    let tickers = (0..m).map(|j| format!("SYN{j:03}")).collect();
    let panel = PricePanel::complete(weekdays(spec.start, spec.days), tickers, rows)?;
    Ok(SyntheticMarket { panel, relatives })
}

pub fn gen_synthetic_panel(spec: &SyntheticSpec) -> Result<PricePanel> {
    gen_synthetic_market(spec).map(|s| s.panel)
}

/// Seed of the bundled comparison scenario.
pub const SCENARIO_SEED: u64 = 20230606;

/// The bundled comparison scenario: 10 assets over 1,300 trading days where
/// the cheapest assets carry the highest market exposure, so both the size
/// and momentum tilts lean toward the growth-optimal vertex.
pub fn comparison_scenario() -> SyntheticSpec {
    SyntheticSpec::single_factor(10, 1300, SCENARIO_SEED)
}
