//! Factor-tilted universal portfolio backtests.
//!
//! At each decision date `t` the harness builds the factor's concentration
//! vector from prices up to `t`, draws a fresh set of Dirichlet managers,
//! scores every manager by its constant-rebalanced wealth over the returns
//! observed since the start of the window, and trades the next period at the
//! wealth-weighted mean portfolio.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::alphas::{alpha_for, FactorKind, PriceHistory, DEFAULT_SPAN};
use crate::error::{Error, Result};
use crate::ingest::{filter_universe, resample_weekly_median, to_relative_prices, Dropped, PricePanel, DEFAULT_MIN_HISTORY, DEFAULT_MIN_PRICE};
use crate::simplex::{DirichletSampler, Portfolio, RngStream};
use crate::wealth::{average_growth_rate, cumulative_log_wealth, period_return, universal_weights, ManagerEnsemble, RelativePrice, WealthSeries};

pub const DEFAULT_MANAGERS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Resample {
    Daily,
    WeeklyMedian,
}

impl Resample {
    pub fn name(self) -> &'static str {
        match self {
            Resample::Daily => "daily",
            Resample::WeeklyMedian => "weekly-median",
        }
    }

    pub fn periods_per_year(self) -> f64 {
        match self {
            Resample::Daily => 252.0,
            Resample::WeeklyMedian => 52.0,
        }
    }
}

impl fmt::Display for Resample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "daily" => Ok(Resample::Daily),
            "weekly-median" => Ok(Resample::WeeklyMedian),
            other => Err(Error::InvalidArgument(format!("unknown resample '{other}' (expected daily or weekly-median)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestConfig {
    pub factor: FactorKind,
    pub managers: usize,
    pub seed: u64,
    pub resample: Resample,
    pub window: Option<(NaiveDate, NaiveDate)>,
    /// Minimum daily observations per ticker, applied before resampling.
    pub history_filter: usize,
    pub min_price: f64,
    pub span: usize,
    /// Sample one ensemble at the window start and carry it forward instead
    /// of redrawing managers each period. The concentration stays at its
    /// window-start value.
    pub persistent_ensemble: bool,
}

impl BacktestConfig {
    pub fn new(factor: FactorKind, seed: u64) -> Self {
        BacktestConfig {
            factor,
            managers: DEFAULT_MANAGERS,
            seed,
            resample: Resample::WeeklyMedian,
            window: None,
            history_filter: DEFAULT_MIN_HISTORY,
            min_price: DEFAULT_MIN_PRICE,
            span: DEFAULT_SPAN,
            persistent_ensemble: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.managers == 0 {
            return Err(Error::InvalidArgument("managers must be at least 1".into()));
        }
        if let Some((start, end)) = self.window {
            if start >= end {
                return Err(Error::InvalidArgument(format!("window start {start} is not before end {end}")));
            }
        }
        if self.span == 0 {
            return Err(Error::InvalidArgument("span must be at least 1".into()));
        }
        if !self.min_price.is_finite() || self.min_price < 0.0 {
            return Err(Error::InvalidArgument(format!("min price {} is invalid", self.min_price)));
        }
        Ok(())
    }

    /// Settings that must agree across strategies in a comparison.
    fn market_key(&self) -> (Resample, Option<(NaiveDate, NaiveDate)>, usize, u64, usize) {
        (self.resample, self.window, self.history_filter, self.min_price.to_bits(), self.span)
    }
}

/// A filtered, resampled and windowed panel with no gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedMarket {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: Vec<Vec<f64>>,
    /// `relatives[t]` is the return from `dates[t]` to `dates[t + 1]`.
    pub relatives: Vec<RelativePrice>,
    pub dropped: Vec<Dropped>,
    pub periods_per_year: f64,
}

pub fn prepare_market(cfg: &BacktestConfig, panel: &PricePanel) -> Result<PreparedMarket> {
    cfg.validate()?;
    let (filtered, dropped) = filter_universe(panel, cfg.history_filter, cfg.min_price)?;
    let resampled = match cfg.resample {
        Resample::Daily => filtered,
        Resample::WeeklyMedian => resample_weekly_median(&filtered),
    };
    let windowed = match cfg.window {
        Some((start, end)) => resampled.window(start, end)?,
        None => resampled,
    };
    if windowed.tickers().len() < 2 {
        return Err(Error::UniverseTooSmall(windowed.tickers().len()));
    }
    if windowed.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: windowed.len() });
    }
    let prices = windowed.dense()?;
    let relatives = to_relative_prices(&windowed)?;
    Ok(PreparedMarket {
        dates: windowed.dates().to_vec(),
        tickers: windowed.tickers().to_vec(),
        prices,
        relatives,
        dropped,
        periods_per_year: cfg.resample.periods_per_year(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub terminal_wealth: f64,
    pub growth_rate: f64,
    pub sharpe: f64,
    /// Set when the log returns have no spread and `sharpe` was reported as 0.
    pub sharpe_degenerate: bool,
    pub max_drawdown: f64,
}

/// Terminal wealth, average growth rate, annualized Sharpe of per-period log
/// returns and the largest peak-to-trough decline.
pub fn metrics(ws: &WealthSeries, periods_per_year: f64) -> Result<Metrics> {
    let growth_rate = average_growth_rate(ws)?;
    let v = ws.values();
    let logs: Vec<f64> = v.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let std = if logs.len() > 1 {
        (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let sharpe_degenerate = !(std > 1e-15);
    let sharpe = if sharpe_degenerate { 0.0 } else { mean / std * periods_per_year.sqrt() };
    let mut peak = f64::NEG_INFINITY;
    let mut max_drawdown = 0.0f64;
    for w in v {
        peak = peak.max(*w);
        max_drawdown = max_drawdown.max(1.0 - w / peak);
    }
    Ok(Metrics { terminal_wealth: ws.terminal(), growth_rate, sharpe, sharpe_degenerate, max_drawdown })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestResult {
    pub factor: FactorKind,
    pub tickers: Vec<String>,
    /// `dates[k]` stamps `wealth[k]`; the first date is the window start.
    pub dates: Vec<NaiveDate>,
    pub wealth: WealthSeries,
    /// `weights[k]` is chosen at `dates[k]` and held until `dates[k + 1]`.
    pub weights: Vec<Portfolio>,
    pub metrics: Metrics,
    /// Leading periods skipped so every factor in the run is computable.
    pub warmup: usize,
    pub dropped: Vec<Dropped>,
}

/// Runs one strategy from `start`, an index into `market.dates`.
pub fn run_prepared(cfg: &BacktestConfig, market: &PreparedMarket, start: usize) -> Result<BacktestResult> {
    cfg.validate()?;
    let last = market.dates.len() - 1;
    if start >= last {
        return Err(Error::SeriesTooShort { need: start + 2, got: market.dates.len() });
    }
    let alpha_at = |t: usize| alpha_for(cfg.factor, &PriceHistory::new(&market.prices[..=t])?, cfg.span);

    let mut persistent = if cfg.persistent_ensemble {
        let sampler = DirichletSampler::new(&alpha_at(start)?);
        let managers: Vec<Portfolio> = (0..cfg.managers as u64)
            .into_par_iter()
            .map(|k| sampler.sample(&mut RngStream::for_manager(cfg.seed, 0, k).rng()))
            .collect();
        Some(ManagerEnsemble::new(managers)?)
    } else {
        None
    };

    let mut log_wealth = vec![0.0];
    let mut weights = Vec::with_capacity(last - start);
    for t in start..last {
        let w = match persistent.as_mut() {
            Some(ensemble) => {
                if t > start {
                    ensemble.advance(&market.relatives[t - 1])?;
                }
                universal_weights(ensemble)?
            }
            None => {
                let sampler = DirichletSampler::new(&alpha_at(t)?);
                let history = &market.relatives[start..t];
                let scored = (0..cfg.managers as u64)
                    .into_par_iter()
                    .map(|k| {
                        let b = sampler.sample(&mut RngStream::for_manager(cfg.seed, t as u64, k).rng());
                        let lw = cumulative_log_wealth(&b, history)?;
                        Ok((b, lw))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (managers, logs): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
                universal_weights(&ManagerEnsemble::with_log_wealth(managers, logs, t - start)?)?
            }
        };
        let r = period_return(&w, &market.relatives[t])?;
        log_wealth.push(log_wealth.last().unwrap() + r.ln());
        weights.push(w);
    }

    let wealth = WealthSeries::from_log(&log_wealth)?;
    let metrics = metrics(&wealth, market.periods_per_year)?;
    Ok(BacktestResult {
        factor: cfg.factor,
        tickers: market.tickers.clone(),
        dates: market.dates[start..].to_vec(),
        wealth,
        weights,
        metrics,
        warmup: start,
        dropped: market.dropped.clone(),
    })
}

/// Filters, resamples and windows `panel`, then runs the strategy once its
/// factor has enough history.
pub fn run_backtest(cfg: &BacktestConfig, panel: &PricePanel) -> Result<BacktestResult> {
    let market = prepare_market(cfg, panel)?;
    run_prepared(cfg, &market, cfg.factor.min_history())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub dates: Vec<NaiveDate>,
    pub strategies: Vec<(String, BacktestResult)>,
}

/// Runs every configuration on the same relative prices and the same window.
///
/// The window opens once the slowest factor in the set is computable.
pub fn compare_strategies(cfgs: &[BacktestConfig], panel: &PricePanel) -> Result<Comparison> {
    let Some(first) = cfgs.first() else {
        return Err(Error::InvalidArgument("no strategies to compare".into()));
    };
    if let Some(c) = cfgs.iter().find(|c| c.market_key() != first.market_key()) {
        return Err(Error::InvalidArgument(format!(
            "strategy {} uses different resample/window/filter settings from {}",
            c.factor, first.factor
        )));
    }
    let market = prepare_market(first, panel)?;
    let start = cfgs.iter().map(|c| c.factor.min_history()).max().unwrap_or(0);
    let mut strategies: Vec<(String, BacktestResult)> = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let mut name = cfg.factor.name().to_string();
        let mut n = 1;
        while strategies.iter().any(|(s, _)| *s == name) {
            n += 1;
            name = format!("{}#{n}", cfg.factor.name());
        }
        strategies.push((name, run_prepared(cfg, &market, start)?));
    }
    Ok(Comparison { dates: market.dates[start..].to_vec(), strategies })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn business_dates(n: usize) -> Vec<NaiveDate> {
        let mut d = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        (0..n)
            .map(|_| {
                let out = d;
                d = d.succ_opt().unwrap();
                out
            })
            .collect()
    }

    fn daily(cfg: BacktestConfig) -> BacktestConfig {
        BacktestConfig { resample: Resample::Daily, history_filter: 0, min_price: 0.0, ..cfg }
    }

    #[test]
    fn metrics_examples() {
        let m = metrics(&WealthSeries::new(vec![1.0, 2.0, 4.0]).unwrap(), 52.0).unwrap();
        assert_relative_eq!(m.growth_rate, 2f64.ln(), max_relative = 1e-15);
        assert_eq!(m.max_drawdown, 0.0);
        assert!(m.sharpe_degenerate);
        assert_eq!(m.sharpe, 0.0);
        let m = metrics(&WealthSeries::new(vec![1.0, 2.0, 1.0]).unwrap(), 52.0).unwrap();
        assert_relative_eq!(m.max_drawdown, 0.5);
        let m = metrics(&WealthSeries::new(vec![1.0, 1.1, 1.3, 1.2]).unwrap(), 252.0).unwrap();
        assert!(m.sharpe > 0.0 && !m.sharpe_degenerate);
    }

    #[test]
    fn identical_assets_track_buy_and_hold() {
        let path = [10.0, 10.5, 10.2, 11.0, 10.8, 11.5];
        let prices: Vec<Vec<f64>> = path.iter().map(|p| vec![*p; 4]).collect();
        let panel = PricePanel::complete(business_dates(path.len()), (0..4).map(|j| format!("A{j}")).collect(), prices).unwrap();
        let cfg = daily(BacktestConfig { managers: 500, ..BacktestConfig::new(FactorKind::Uniform, 3) });
        let res = run_backtest(&cfg, &panel).unwrap();
        assert_relative_eq!(res.wealth.terminal(), 11.5 / 10.0, max_relative = 1e-12);
        for w in &res.weights {
            for x in w.weights() {
                assert!((x - 0.25).abs() < 0.03, "{w}");
            }
        }
    }

    #[test]
    fn single_manager_single_period_trades_its_sample() {
        let panel = PricePanel::complete(business_dates(2), vec!["A".into(), "B".into()], vec![vec![10.0, 10.0], vec![12.0, 9.0]]).unwrap();
        let cfg = daily(BacktestConfig { managers: 1, ..BacktestConfig::new(FactorKind::Uniform, 11) });
        let res = run_backtest(&cfg, &panel).unwrap();
        let b = crate::simplex::sample_dirichlet(
            &crate::simplex::AlphaVector::ones(2).unwrap(),
            1,
            &RngStream::for_manager(11, 0, 0),
        )
        .unwrap()
        .remove(0);
        assert_eq!(res.weights.len(), 1);
        for (w, v) in res.weights[0].weights().iter().zip(b.weights()) {
            assert!((w - v).abs() <= 1e-15);
        }
        assert_relative_eq!(res.wealth.terminal(), 1.2 * b.weights()[0] + 0.9 * b.weights()[1], max_relative = 1e-15);
    }

    #[test]
    fn compare_rejects_empty_and_mismatched() {
        let panel = PricePanel::complete(business_dates(3), vec!["A".into(), "B".into()], vec![vec![1.0, 2.0]; 3]).unwrap();
        assert!(compare_strategies(&[], &panel).is_err());
        let a = daily(BacktestConfig::new(FactorKind::Uniform, 1));
        let b = BacktestConfig { resample: Resample::WeeklyMedian, ..a.clone() };
        assert!(compare_strategies(&[a, b], &panel).is_err());
    }

    #[test]
    fn compare_identical_configs_give_identical_rows() {
        let prices: Vec<Vec<f64>> = (0..12).map(|i| vec![10.0 + i as f64, 20.0 - i as f64 * 0.5, 15.0 + (i % 3) as f64]).collect();
        let panel = PricePanel::complete(business_dates(12), vec!["A".into(), "B".into(), "C".into()], prices).unwrap();
        let cfg = daily(BacktestConfig { managers: 64, ..BacktestConfig::new(FactorKind::Size, 5) });
        let cmp = compare_strategies(&[cfg.clone(), cfg], &panel).unwrap();
        assert_eq!(cmp.strategies[0].0, "size");
        assert_eq!(cmp.strategies[1].0, "size#2");
        assert_eq!(cmp.strategies[0].1, cmp.strategies[1].1);
    }

    #[test]
    fn warmup_is_shared_across_strategies() {
        let prices: Vec<Vec<f64>> = (0..10).map(|i| vec![10.0 + i as f64, 20.0 - i as f64, 15.0]).collect();
        let panel = PricePanel::complete(business_dates(10), vec!["A".into(), "B".into(), "C".into()], prices).unwrap();
        let cfgs: Vec<_> = [FactorKind::Uniform, FactorKind::Sharpe]
            .into_iter()
            .map(|f| daily(BacktestConfig { managers: 16, ..BacktestConfig::new(f, 1) }))
            .collect();
        let cmp = compare_strategies(&cfgs, &panel).unwrap();
        for (_, r) in &cmp.strategies {
            assert_eq!(r.warmup, 2);
            assert_eq!(r.weights.len(), 7);
            assert_eq!(r.wealth.len(), 8);
            assert_eq!(r.dates, cmp.dates);
        }
    }

    #[test]
    fn warmup_consuming_everything_is_an_error() {
        let panel = PricePanel::complete(business_dates(2), vec!["A".into(), "B".into()], vec![vec![1.0, 2.0], vec![1.1, 2.1]]).unwrap();
        let cfg = daily(BacktestConfig { managers: 4, ..BacktestConfig::new(FactorKind::Sharpe, 1) });
        assert!(matches!(run_backtest(&cfg, &panel), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = BacktestConfig::new(FactorKind::Size, 1);
        cfg.managers = 0;
        assert!(cfg.validate().is_err());
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let cfg = BacktestConfig { window: Some((d, d)), ..BacktestConfig::new(FactorKind::Size, 1) };
        assert!(cfg.validate().is_err());
        assert_eq!("weekly-median".parse::<Resample>().unwrap(), Resample::WeeklyMedian);
        assert!("monthly".parse::<Resample>().is_err());
    }
}
