//! Synthetic factor markets and closed-form growth identities.
//!
//! Single-factor markets scale one market return by per-asset exposures,
//! `X_i = R_i · β`. Two-factor markets are log-linear,
//! `R_ji = r1_i^β1_j · r2_i^β2_j`. Both produce [`RelativePrice`] sequences
//! that the wealth engine consumes.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simplex::{sample_managers, AlphaVector, Portfolio, RngStream};
use crate::wealth::{cumulative_log_wealth, log_mean_exp, RelativePrice};

/// Per-asset factor loadings, `m × k` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorExposures {
    betas: Vec<f64>,
    assets: usize,
    factors: usize,
}

impl FactorExposures {
    /// Loadings must be finite and non-negative. A zero loading switches a
    /// factor off for that asset; single-factor markets additionally need
    /// strictly positive loadings.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let assets = rows.len();
        let factors = rows.first().map_or(0, Vec::len);
        if assets == 0 || factors == 0 {
            return Err(Error::InvalidArgument("exposure matrix is empty".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != factors) {
            return Err(Error::DimensionMismatch { expected: factors, got: r.len() });
        }
        let betas: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidArgument(format!("factor exposure {b} is not finite and non-negative")));
        }
        Ok(FactorExposures { betas, assets, factors })
    }

    pub fn single(betas: Vec<f64>) -> Result<Self> {
        FactorExposures::new(betas.into_iter().map(|b| vec![b]).collect())
    }

    pub fn two(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::DimensionMismatch { expected: first.len(), got: second.len() });
        }
        FactorExposures::new(first.into_iter().zip(second).map(|(a, b)| vec![a, b]).collect())
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn get(&self, asset: usize, factor: usize) -> f64 {
        self.betas[asset * self.factors + factor]
    }

    /// Loadings of every asset on `factor`.
    pub fn column(&self, factor: usize) -> Vec<f64> {
        (0..self.assets).map(|j| self.get(j, factor)).collect()
    }

    fn require_factors(&self, k: usize) -> Result<()> {
        if self.factors != k {
            return Err(Error::InvalidArgument(format!(
                "expected a {k}-factor exposure matrix, got {} factors",
                self.factors
            )));
        }
        Ok(())
    }
}

/// Gross factor returns, one equally long series per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorReturnsSeries {
    series: Vec<Vec<f64>>,
}

impl FactorReturnsSeries {
    pub fn new(series: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = series.first() else {
            return Err(Error::InvalidArgument("no factor series".into()));
        };
        let n = first.len();
        if let Some(s) = series.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: s.len() });
        }
        if let Some(r) = series.iter().flatten().find(|r| !r.is_finite() || **r <= 0.0) {
            return Err(Error::InvalidArgument(format!("factor return {r} is not positive and finite")));
        }
        Ok(FactorReturnsSeries { series })
    }

    pub fn factors(&self) -> usize {
        self.series.len()
    }

    pub fn periods(&self) -> usize {
        self.series[0].len()
    }

    pub fn factor(&self, k: usize) -> &[f64] {
        &self.series[k]
    }

    /// Buy-and-hold growth `(1/n) Σ_i log r_ki` of factor `k`.
    pub fn growth(&self, k: usize) -> f64 {
        let s = &self.series[k];
        s.iter().map(|r| r.ln()).sum::<f64>() / s.len() as f64
    }
}

/// Log-normal gross-return law for synthetic factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalFactor {
    /// Mean of the per-period log return.
    pub drift: f64,
    /// Standard deviation of the per-period log return.
    pub vol: f64,
}

impl LogNormalFactor {
    pub fn new(drift: f64, vol: f64) -> Result<Self> {
        if !drift.is_finite() || !(vol >= 0.0) || !vol.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid log-normal parameters drift={drift} vol={vol}")));
        }
        Ok(LogNormalFactor { drift, vol })
    }
}

/// Draws `periods` gross returns for each factor law, factor `k` from
/// stream `(stream.master_seed, stream.stream_id + k)`.
pub fn lognormal_factor_returns(laws: &[LogNormalFactor], periods: usize, stream: &RngStream) -> Result<FactorReturnsSeries> {
    let series = laws
        .iter()
        .enumerate()
        .map(|(k, law)| {
            let normal = Normal::new(law.drift, law.vol).expect("validated parameters");
            let mut rng = RngStream::new(stream.master_seed, stream.stream_id.wrapping_add(k as u64)).rng();
            (0..periods).map(|_| normal.sample(&mut rng).exp()).collect()
        })
        .collect();
    FactorReturnsSeries::new(series)
}

/// `X_i = R_i · β`.
pub fn gen_single_factor(beta: &FactorExposures, market: &[f64]) -> Result<Vec<RelativePrice>> {
    beta.require_factors(1)?;
    let b = beta.column(0);
    if let Some(v) = b.iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidArgument(format!("single-factor exposure {v} must be positive")));
    }
    if let Some(r) = market.iter().find(|r| !r.is_finite() || **r <= 0.0) {
        return Err(Error::InvalidArgument(format!("market return {r} is not positive")));
    }
    market
        .iter()
        .map(|r| RelativePrice::new(b.iter().map(|bj| r * bj).collect()))
        .collect()
}

/// `R_ji = r1_i^β1_j · r2_i^β2_j`.
pub fn gen_two_factor(beta: &FactorExposures, f: &FactorReturnsSeries) -> Result<Vec<RelativePrice>> {
    beta.require_factors(2)?;
    if f.factors() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f.factors() });
    }
    (0..f.periods())
        .map(|i| {
            let (r1, r2) = (f.factor(0)[i], f.factor(1)[i]);
            RelativePrice::new(
                (0..beta.assets())
                    .map(|j| r1.powf(beta.get(j, 0)) * r2.powf(beta.get(j, 1)))
                    .collect(),
            )
        })
        .collect()
}

/// Excess growth of a CRP over the market in a single-factor market, `log(bᵀβ)`.
pub fn single_factor_excess_growth(b: &Portfolio, beta: &FactorExposures) -> Result<f64> {
    beta.require_factors(1)?;
    let d = b.dot(&beta.column(0))?;
    if !(d > 0.0) {
        return Err(Error::NonPositiveReturn { period: 0, value: d });
    }
    Ok(d.ln())
}

/// The portfolio drag `−log(1 / (m · b_GM))`: zero for the equal-weight
/// portfolio, negative otherwise, `−∞` once any weight is zero.
pub fn portfolio_drag(b: &Portfolio) -> f64 {
    let w = b.weights();
    if w.iter().all(|x| *x == w[0]) {
        // all equal on the simplex: b_GM = 1/m exactly
        return 0.0;
    }
    if w.iter().any(|x| *x == 0.0) {
        return f64::NEG_INFINITY;
    }
    let m = w.len() as f64;
    m.ln() + w.iter().map(|x| x.ln()).sum::<f64>() / m
}

/// Lower bound on the average growth of CRP `b` in a two-factor market:
/// `mean(β1)·G1 + mean(β2)·G2 − log(1 / (m·b_GM))`.
///
/// Returns `−∞` when any weight of `b` is zero.
pub fn two_factor_lower_bound(beta: &FactorExposures, g1: f64, g2: f64, b: &Portfolio) -> Result<f64> {
    beta.require_factors(2)?;
    if b.dim() != beta.assets() {
        return Err(Error::DimensionMismatch { expected: beta.assets(), got: b.dim() });
    }
    let m = beta.assets() as f64;
    let mean1 = beta.column(0).iter().sum::<f64>() / m;
    let mean2 = beta.column(1).iter().sum::<f64>() / m;
    Ok(mean1 * g1 + mean2 * g2 + portfolio_drag(b))
}

/// `F_n = mⁿ (Σβ²)ⁿ / (Σβ)^{2n}` with its logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FnRatio {
    pub log_value: f64,
    pub value: f64,
    /// `value` overflowed to `+∞`; `log_value` is still exact.
    pub overflowed: bool,
}

pub fn fn_ratio(beta: &[f64], n: u32) -> Result<FnRatio> {
    if beta.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 assets, got {}", beta.len())));
    }
    if let Some(b) = beta.iter().find(|b| !b.is_finite() || **b <= 0.0) {
        return Err(Error::InvalidArgument(format!("beta {b} must be positive and finite")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let m = beta.len() as f64;
    let sum: f64 = beta.iter().sum();
    let sum_sq: f64 = beta.iter().map(|b| b * b).sum();
    let log_value = n as f64 * ((m * sum_sq).ln() - 2.0 * sum.ln());
    let value = log_value.exp();
    Ok(FnRatio { log_value, value, overflowed: value.is_infinite() })
}

/// Both sides of `(Σβ)² ≤ m Σβ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchySchwarz {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn cauchy_schwarz_check(beta: &[f64]) -> CauchySchwarz {
    let m = beta.len() as f64;
    let sum: f64 = beta.iter().sum();
    let lhs = sum * sum;
    let rhs = m * beta.iter().map(|b| b * b).sum::<f64>();
    CauchySchwarz { lhs, rhs, holds: lhs <= rhs + 1e-12 * rhs }
}

/// Terminal ensemble-average wealth of `Dirichlet(β)` and `Dirichlet(1)` managers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DominanceOutcome {
    pub log_wealth_beta: f64,
    pub log_wealth_uniform: f64,
}

impl DominanceOutcome {
    pub fn wealth_beta(&self) -> f64 {
        self.log_wealth_beta.exp()
    }

    pub fn wealth_uniform(&self) -> f64 {
        self.log_wealth_uniform.exp()
    }

    pub fn ratio(&self) -> f64 {
        (self.log_wealth_beta - self.log_wealth_uniform).exp()
    }
}

/// Market law used by [`dominance_experiment`].
pub const DOMINANCE_MARKET: LogNormalFactor = LogNormalFactor { drift: 0.0005, vol: 0.01 };

/// Stream id of the market path inside a dominance run; manager streams use
/// [`RngStream::for_manager`] with epoch 0 and never reach this id.
const MARKET_STREAM: u64 = u64::MAX - 1;

/// One Monte Carlo replicate of the informed-vs-uniform Dirichlet wealth comparison.
///
/// Both ensembles share the same manager streams, so the two estimates use
/// common random numbers.
pub fn dominance_experiment(beta: &FactorExposures, periods: usize, managers: usize, rng: &RngStream) -> Result<DominanceOutcome> {
    if managers == 0 {
        return Err(Error::InvalidArgument("manager count must be at least 1".into()));
    }
    let seed = rng.master_seed ^ rng.stream_id.rotate_left(32);
    let market = lognormal_factor_returns(&[DOMINANCE_MARKET], periods, &RngStream::new(seed, MARKET_STREAM))?;
    let xs = gen_single_factor(beta, market.factor(0))?;
    let tilted = AlphaVector::new(beta.column(0))?;
    let uniform = AlphaVector::ones(beta.assets())?;
    let log_mean = |alpha: &AlphaVector| -> Result<f64> {
        let logs = sample_managers(alpha, managers, seed, 0)?
            .par_iter()
            .map(|b| cumulative_log_wealth(b, &xs))
            .collect::<Result<Vec<f64>>>()?;
        Ok(log_mean_exp(&logs))
    };
    Ok(DominanceOutcome {
        log_wealth_beta: log_mean(&tilted)?,
        log_wealth_uniform: log_mean(&uniform)?,
    })
}

/// Replicates across seeds with the mean ratio and its one-sided 95% bound.
#[derive(Clone, Debug, PartialEq)]
pub struct DominanceStudy {
    pub outcomes: Vec<DominanceOutcome>,
    pub mean_ratio: f64,
    pub std_error: f64,
    /// `mean_ratio − 1.645 · std_error`.
    pub lower_bound_95: f64,
}

pub fn dominance_study(beta: &FactorExposures, periods: usize, managers: usize, replicates: usize, base_seed: u64) -> Result<DominanceStudy> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let outcomes = (0..replicates as u64)
        .map(|r| dominance_experiment(beta, periods, managers, &RngStream::new(base_seed.wrapping_add(r), 0)))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = outcomes.iter().map(DominanceOutcome::ratio).collect();
    let n = ratios.len() as f64;
    let mean_ratio = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - mean_ratio).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    Ok(DominanceStudy { outcomes, mean_ratio, std_error, lower_bound_95: mean_ratio - 1.645 * std_error })
}
