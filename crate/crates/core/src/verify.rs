//! Randomized checks of the closed-form growth results.
//!
//! Each suite draws its instances from a seeded stream, evaluates the
//! identity or inequality, and reports the worst case it saw along with the
//! instance that produced it.

use rand::Rng;

use crate::error::Result;
use crate::markets::{
    cauchy_schwarz_check, fn_ratio, gen_single_factor, gen_two_factor, lognormal_factor_returns, portfolio_drag,
    two_factor_lower_bound, FactorExposures, LogNormalFactor,
};
use crate::simplex::{sample_dirichlet, AlphaVector, Portfolio, RngStream};
use crate::wealth::{average_growth_rate, cumulative_log_wealth, expected_log_growth, WealthSeries};

/// Tolerance for `F_n ≥ 1`.
pub const FN_TOL: f64 = 1e-12;
/// `|F_n − 1|` allowed on constant-β instances.
pub const FN_EQUALITY_TOL: f64 = 1e-10;
/// Relative slack in the Cauchy–Schwarz check.
pub const CS_REL_TOL: f64 = 1e-12;
/// Residual allowed in the single-factor growth identity.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Slack allowed below the two-factor lower bound.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FnSuiteConfig {
    pub instances: usize,
    pub min_assets: usize,
    pub max_assets: usize,
    pub max_periods: u32,
    pub max_beta: f64,
    /// Every `constant_every`-th instance uses a constant β.
    pub constant_every: usize,
    pub seed: u64,
}

impl Default for FnSuiteConfig {
    fn default() -> Self {
        FnSuiteConfig {
            instances: 10_000,
            min_assets: 2,
            max_assets: 50,
            max_periods: 100,
            max_beta: 10.0,
            constant_every: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FnSuiteReport {
    pub instances: usize,
    pub constant_instances: usize,
    pub min_fn: f64,
    /// Largest `|F_n − 1|` over constant-β instances.
    pub max_constant_deviation: f64,
    /// Smallest `F_n − 1` over non-constant instances.
    pub min_nonconstant_excess: f64,
    /// Largest `(lhs − rhs) / rhs` in the Cauchy–Schwarz check.
    pub max_cs_violation: f64,
    pub fn_failures: usize,
    pub equality_failures: usize,
    pub cs_failures: usize,
    pub counterexample: Option<(Vec<f64>, u32)>,
}

impl FnSuiteReport {
    pub fn passed(&self) -> bool {
        self.fn_failures == 0 && self.equality_failures == 0 && self.cs_failures == 0
    }
}

/// Draws `(β, n)` instances and checks `F_n ≥ 1`, equality iff β is constant,
/// and `(Σβ)² ≤ m Σβ²`.
pub fn fn_ratio_suite(cfg: &FnSuiteConfig) -> Result<FnSuiteReport> {
    let mut rng = RngStream::new(cfg.seed, 0x466e).rng();
    let mut report = FnSuiteReport {
        min_fn: f64::INFINITY,
        min_nonconstant_excess: f64::INFINITY,
        max_cs_violation: f64::NEG_INFINITY,
        ..Default::default()
    };
    for i in 0..cfg.instances {
        let m = rng.random_range(cfg.min_assets..=cfg.max_assets);
        let n = rng.random_range(1..=cfg.max_periods);
        let constant = cfg.constant_every > 0 && i % cfg.constant_every == 0;
        // (0, max_beta]
        let mut draw = || cfg.max_beta * (1.0 - rng.random::<f64>());
        let beta: Vec<f64> = if constant { vec![draw(); m] } else { (0..m).map(|_| draw()).collect() };
        // an i.i.d. draw that happens to be constant is still a constant instance
        let is_constant = beta.iter().all(|b| *b == beta[0]);

        let f = fn_ratio(&beta, n)?;
        report.instances += 1;
        report.min_fn = report.min_fn.min(f.value);
        let mut failed = false;
        if f.value < 1.0 - FN_TOL {
            report.fn_failures += 1;
            failed = true;
        }
        let deviation = (f.value - 1.0).abs();
        if is_constant {
            report.constant_instances += 1;
            report.max_constant_deviation = report.max_constant_deviation.max(deviation);
            if deviation > FN_EQUALITY_TOL {
                report.equality_failures += 1;
                failed = true;
            }
        } else {
            report.min_nonconstant_excess = report.min_nonconstant_excess.min(f.value - 1.0);
            if deviation <= FN_EQUALITY_TOL {
                report.equality_failures += 1;
                failed = true;
            }
        }

        let cs = cauchy_schwarz_check(&beta);
        report.max_cs_violation = report.max_cs_violation.max((cs.lhs - cs.rhs) / cs.rhs);
        if !(cs.lhs <= cs.rhs * (1.0 + CS_REL_TOL)) {
            report.cs_failures += 1;
            failed = true;
        }
        if failed && report.counterexample.is_none() {
            report.counterexample = Some((beta, n));
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct IdentitySuiteConfig {
    pub instances: usize,
    pub max_assets: usize,
    pub max_periods: usize,
    pub seed: u64,
}

impl Default for IdentitySuiteConfig {
    fn default() -> Self {
        IdentitySuiteConfig { instances: 100, max_assets: 10, max_periods: 500, seed: 0 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct IdentityReport {
    pub instances: usize,
    pub max_residual: f64,
    pub failures: usize,
    pub counterexample: Option<(Vec<f64>, Portfolio)>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Measures `G − G_m` on generated single-factor markets and compares it with `log(bᵀβ)`.
pub fn single_factor_identity_suite(cfg: &IdentitySuiteConfig) -> Result<IdentityReport> {
    let mut rng = RngStream::new(cfg.seed, 0x1d).rng();
    let mut report = IdentityReport::default();
    for i in 0..cfg.instances as u64 {
        let m = rng.random_range(2..=cfg.max_assets.max(2));
        let n = rng.random_range(1..=cfg.max_periods.max(1));
        let beta: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let exposures = FactorExposures::single(beta.clone())?;
        let law = LogNormalFactor::new(rng.random_range(-0.002..0.002), rng.random_range(0.0..0.05))?;
        let market = lognormal_factor_returns(&[law], n, &RngStream::new(cfg.seed, 0x1000 + i))?;
        let xs = gen_single_factor(&exposures, market.factor(0))?;
        let b = interior_portfolio(m, &RngStream::new(cfg.seed, 0x2000 + i))?;

        let crp = WealthSeries::from_log(&running_log_wealth(&b, &xs)?)?;
        let mut market_log = vec![0.0];
        for r in market.factor(0) {
            market_log.push(market_log.last().unwrap() + r.ln());
        }
        let market_ws = WealthSeries::from_log(&market_log)?;
        let measured = average_growth_rate(&crp)? - average_growth_rate(&market_ws)?;
        let predicted = b.dot(&beta)?.ln();
        let residual = (measured - predicted).abs();
        report.instances += 1;
        report.max_residual = report.max_residual.max(residual);
        if !(residual <= IDENTITY_TOL) {
            report.failures += 1;
            report.counterexample.get_or_insert((beta, b));
        }
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct BoundSuiteConfig {
    pub instances: usize,
    pub max_assets: usize,
    pub max_periods: usize,
    pub seed: u64,
}

impl Default for BoundSuiteConfig {
    fn default() -> Self {
        BoundSuiteConfig { instances: 1_000, max_assets: 10, max_periods: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BoundReport {
    pub instances: usize,
    /// Smallest `GR_avg − bound` seen.
    pub min_slack: f64,
    pub failures: usize,
    /// Drag of the equal-weight portfolio on every instance was exactly zero.
    pub uniform_drag_zero: bool,
    pub counterexample: Option<(FactorExposures, Portfolio)>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.uniform_drag_zero
    }
}

/// Checks the AM–GM lower bound on log-normal two-factor markets.
///
/// `GR_avg` is the sample mean of `log(bᵀX_i)` over the generated horizon.
pub fn two_factor_bound_suite(cfg: &BoundSuiteConfig) -> Result<BoundReport> {
    let mut rng = RngStream::new(cfg.seed, 0xb0).rng();
    let mut report = BoundReport { min_slack: f64::INFINITY, uniform_drag_zero: true, ..Default::default() };
    for i in 0..cfg.instances as u64 {
        let m = rng.random_range(2..=cfg.max_assets.max(2));
        let n = rng.random_range(1..=cfg.max_periods.max(1));
        let beta = FactorExposures::two(
            (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
            (0..m).map(|_| rng.random_range(0.0..2.0)).collect(),
        )?;
        let laws = [
            LogNormalFactor::new(rng.random_range(-0.01..0.01), rng.random_range(0.0..0.1))?,
            LogNormalFactor::new(rng.random_range(-0.01..0.01), rng.random_range(0.0..0.1))?,
        ];
        let f = lognormal_factor_returns(&laws, n, &RngStream::new(cfg.seed, 0x10_0000 + 2 * i))?;
        let xs = gen_two_factor(&beta, &f)?;
        let b = interior_portfolio(m, &RngStream::new(cfg.seed, 0x20_0000 + i))?;

        let bound = two_factor_lower_bound(&beta, f.growth(0), f.growth(1), &b)?;
        let measured = expected_log_growth(&b, &xs)?;
        let slack = measured - bound;
        report.instances += 1;
        report.min_slack = report.min_slack.min(slack);
        if !(slack >= -BOUND_TOL) {
            report.failures += 1;
            report.counterexample.get_or_insert((beta.clone(), b));
        }
        if portfolio_drag(&Portfolio::uniform(m)?) != 0.0 {
            report.uniform_drag_zero = false;
        }
    }
    Ok(report)
}

/// A Dirichlet(1) draw, redrawn until every weight is positive.
fn interior_portfolio(m: usize, stream: &RngStream) -> Result<Portfolio> {
    let alpha = AlphaVector::ones(m)?;
    let mut attempt = 0;
    loop {
        let b = sample_dirichlet(&alpha, 1, &RngStream::new(stream.master_seed, stream.stream_id ^ (attempt << 48)))?.remove(0);
        if b.weights().iter().all(|w| *w > 0.0) {
            return Ok(b);
        }
        attempt += 1;
    }
}

fn running_log_wealth(b: &Portfolio, xs: &[crate::wealth::RelativePrice]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.push(0.0);
    for x in xs {
        let step = cumulative_log_wealth(b, std::slice::from_ref(x))?;
        out.push(out.last().unwrap() + step);
    }
    Ok(out)
}
