//! Cross-sectional factor transforms that turn price history into Dirichlet
//! concentration vectors.
//!
//! | factor   | alpha                                        |
//! |----------|----------------------------------------------|
//! | uniform  | `1`                                          |
//! | size     | `(1/p) / min(1/p)`                           |
//! | momentum | `max(exp(clamp(z(r), -6, 6)), 1)`            |
//! | sharpe   | `max(clamp(z(S), -6, 6), 1)`                 |
//! | compound | `sqrt(momentum * sharpe)`                    |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simplex::AlphaVector;

pub const WINSOR_LO: f64 = -6.0;
pub const WINSOR_HI: f64 = 6.0;
pub const ALPHA_FLOOR: f64 = 1.0;
pub const DEFAULT_SPAN: usize = 10;
/// Cross sections with a spread below this are scored as all zeros.
pub const ZSCORE_MIN_STD: f64 = 1e-12;
/// Lower bound on the rolling standard deviation used by [`rolling_sharpe`].
pub const SHARPE_STD_FLOOR: f64 = 1e-8;

/// One value per asset, in universe order.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSection {
    values: Vec<f64>,
    labels: Vec<String>,
}

impl CrossSection {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("cross-section value {v} is not finite")));
        }
        Ok(CrossSection { values, labels: Vec::new() })
    }

    pub fn labeled(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), got: labels.len() });
        }
        let mut cs = CrossSection::new(values)?;
        cs.labels = labels;
        Ok(cs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Asset labels; empty for unlabeled cross sections.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> CrossSection {
        CrossSection {
            values: self.values.iter().map(|v| f(*v)).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    Uniform,
    Size,
    Momentum,
    Sharpe,
    Compound,
}

impl FactorKind {
    pub const ALL: [FactorKind; 5] = [
        FactorKind::Uniform,
        FactorKind::Size,
        FactorKind::Momentum,
        FactorKind::Sharpe,
        FactorKind::Compound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Uniform => "uniform",
            FactorKind::Size => "size",
            FactorKind::Momentum => "momentum",
            FactorKind::Sharpe => "sharpe",
            FactorKind::Compound => "compound",
        }
    }

    /// Returns that must be observed before the factor is computable.
    pub fn min_history(self) -> usize {
        match self {
            FactorKind::Uniform | FactorKind::Size => 0,
            FactorKind::Momentum => 1,
            FactorKind::Sharpe | FactorKind::Compound => 2,
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FactorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown factor '{s}' (expected one of: uniform, size, momentum, sharpe, compound)"
                ))
            })
    }
}

/// `(v − mean) / std` with the population standard deviation.
///
/// A cross section whose spread is below [`ZSCORE_MIN_STD`] maps to zeros.
pub fn zscore(v: &CrossSection) -> CrossSection {
    let m = v.len() as f64;
    let mean = v.values.iter().sum::<f64>() / m;
    let var = v.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    let std = var.sqrt();
    if !(std >= ZSCORE_MIN_STD) {
        return v.map(|_| 0.0);
    }
    v.map(|x| (x - mean) / std)
}

pub fn winsorize(v: &CrossSection, lo: f64, hi: f64) -> Result<CrossSection> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("winsorize bounds [{lo}, {hi}] are empty")));
    }
    Ok(v.map(|x| x.clamp(lo, hi)))
}

pub fn truncate_floor(v: &CrossSection, floor: f64) -> Result<CrossSection> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!("floor {floor} must be positive")));
    }
    Ok(v.map(|x| x.max(floor)))
}

fn to_alpha(cs: CrossSection) -> Result<AlphaVector> {
    AlphaVector::new(cs.values)
}

pub fn size_alpha(prices: &CrossSection) -> Result<AlphaVector> {
    if let Some(p) = prices.values.iter().find(|p| **p <= 0.0) {
        return Err(Error::InvalidArgument(format!("price {p} is not positive")));
    }
    let inv: Vec<f64> = prices.values.iter().map(|p| 1.0 / p).collect();
    let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    AlphaVector::new(inv.iter().map(|a| a / min).collect())
}

pub fn momentum_alpha(cum_returns: &CrossSection) -> Result<AlphaVector> {
    let z = winsorize(&zscore(cum_returns), WINSOR_LO, WINSOR_HI)?;
    to_alpha(truncate_floor(&z.map(f64::exp), ALPHA_FLOOR)?)
}

pub fn sharpe_alpha(sharpes: &CrossSection) -> Result<AlphaVector> {
    let z = winsorize(&zscore(sharpes), WINSOR_LO, WINSOR_HI)?;
    to_alpha(truncate_floor(&z, ALPHA_FLOOR)?)
}

pub fn compound_alpha(mom: &AlphaVector, sharpe: &AlphaVector) -> Result<AlphaVector> {
    if mom.dim() != sharpe.dim() {
        return Err(Error::DimensionMismatch { expected: mom.dim(), got: sharpe.dim() });
    }
    AlphaVector::new(
        mom.values()
            .iter()
            .zip(sharpe.values())
            .map(|(a, b)| (a * b).sqrt())
            .collect(),
    )
}

/// Per-asset Sharpe estimates and the assets that lacked history.
#[derive(Clone, Debug, PartialEq)]
pub struct RollingSharpe {
    pub values: CrossSection,
    /// Indices of assets with fewer than two observations; their value is 0.
    pub insufficient: Vec<usize>,
}

/// Latest EWMA of each asset's returns divided by its trailing standard deviation.
///
/// The EWMA has decay `2 / (span + 1)` with weights normalized over the
/// available history. The standard deviation uses the last `min(span, len)`
/// observations with `len − 1` normalization, floored at [`SHARPE_STD_FLOOR`].
pub fn rolling_sharpe(returns: &[Vec<f64>], span: usize) -> Result<RollingSharpe> {
    if span == 0 {
        return Err(Error::InvalidArgument("span must be at least 1".into()));
    }
    let decay = 1.0 - 2.0 / (span as f64 + 1.0);
    let mut values = Vec::with_capacity(returns.len());
    let mut insufficient = Vec::new();
    for (j, series) in returns.iter().enumerate() {
        if series.len() < 2 {
            insufficient.push(j);
            values.push(0.0);
            continue;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        let mut w = 1.0;
        for r in series.iter().rev() {
            num += w * r;
            den += w;
            w *= decay;
        }
        let ewma = num / den;

        let window = &series[series.len().saturating_sub(span)..];
        let std = if window.len() < 2 {
            0.0
        } else {
            let n = window.len() as f64;
            let mean = window.iter().sum::<f64>() / n;
            (window.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        values.push(ewma / std.max(SHARPE_STD_FLOOR));
    }
    Ok(RollingSharpe { values: CrossSection::new(values)?, insufficient })
}

/// Price history visible at a decision point: `rows[0]` is the first date of
/// the panel, `rows[t]` the current one. Every row has one price per asset.
#[derive(Clone, Copy, Debug)]
pub struct PriceHistory<'a> {
    rows: &'a [Vec<f64>],
}

impl<'a> PriceHistory<'a> {
    pub fn new(rows: &'a [Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::SeriesTooShort { need: 1, got: 0 });
        };
        let m = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: r.len() });
        }
        if rows.iter().flatten().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidArgument("price history must be positive and finite".into()));
        }
        Ok(PriceHistory { rows })
    }

    /// Number of returns observed so far.
    pub fn period(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn assets(&self) -> usize {
        self.rows[0].len()
    }

    pub fn current_prices(&self) -> CrossSection {
        CrossSection { values: self.rows[self.period()].clone(), labels: Vec::new() }
    }

    /// Gross return since the first row, minus one.
    pub fn cumulative_returns(&self) -> CrossSection {
        let first = &self.rows[0];
        let last = &self.rows[self.period()];
        CrossSection {
            values: last.iter().zip(first).map(|(l, f)| l / f - 1.0).collect(),
            labels: Vec::new(),
        }
    }

    /// Per-asset simple returns, oldest first.
    pub fn simple_returns(&self) -> Vec<Vec<f64>> {
        (0..self.assets())
            .map(|j| self.rows.windows(2).map(|w| w[1][j] / w[0][j] - 1.0).collect())
            .collect()
    }
}

/// Dirichlet concentration for `kind` using history up to the current row.
pub fn alpha_for(kind: FactorKind, history: &PriceHistory<'_>, span: usize) -> Result<AlphaVector> {
    let have = history.period();
    if have < kind.min_history() {
        return Err(Error::InsufficientHistory {
            factor: kind.name(),
            period: have,
            need: kind.min_history(),
            have,
        });
    }
    match kind {
        FactorKind::Uniform => AlphaVector::ones(history.assets()),
        FactorKind::Size => size_alpha(&history.current_prices()),
        FactorKind::Momentum => momentum_alpha(&history.cumulative_returns()),
        FactorKind::Sharpe => sharpe_alpha(&rolling_sharpe(&history.simple_returns(), span)?.values),
        FactorKind::Compound => compound_alpha(
            &momentum_alpha(&history.cumulative_returns())?,
            &sharpe_alpha(&rolling_sharpe(&history.simple_returns(), span)?.values)?,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cs(v: &[f64]) -> CrossSection {
        CrossSection::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zscore_examples() {
        let z = zscore(&cs(&[0.1, 0.2, 0.3]));
        let expected = 1.5f64.sqrt();
        assert_relative_eq!(z.values()[0], -expected, max_relative = 1e-12);
        assert!(z.values()[1].abs() < 1e-12);
        assert_relative_eq!(z.values()[2], expected, max_relative = 1e-12);
        assert_eq!(zscore(&cs(&[4.0, 4.0, 4.0])).values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zscore_keeps_labels() {
        let v = CrossSection::labeled(vec![1.0, 2.0], vec!["A".into(), "B".into()]).unwrap();
        assert_eq!(zscore(&v).labels(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn winsorize_and_floor_examples() {
        assert_eq!(winsorize(&cs(&[8.0, -7.0, 3.0]), -6.0, 6.0).unwrap().values(), &[6.0, -6.0, 3.0]);
        assert!(winsorize(&cs(&[1.0]), 2.0, 2.0).is_err());
        assert_eq!(truncate_floor(&cs(&[0.2, 5.0]), 1.0).unwrap().values(), &[1.0, 5.0]);
        assert_eq!(truncate_floor(&cs(&[2.0, 5.0]), 1.0).unwrap().values(), &[2.0, 5.0]);
        assert_eq!(truncate_floor(&cs(&[-3.0, 1.0, 2.0]), 1.0).unwrap().values(), &[1.0, 1.0, 2.0]);
        assert!(truncate_floor(&cs(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn size_alpha_examples() {
        assert_eq!(size_alpha(&cs(&[10.0, 20.0, 40.0])).unwrap().values(), &[4.0, 2.0, 1.0]);
        assert_eq!(size_alpha(&cs(&[7.0, 7.0])).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(size_alpha(&cs(&[1.0, 2.0])).unwrap().values(), &[2.0, 1.0]);
        assert!(size_alpha(&cs(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn momentum_alpha_examples() {
        assert_eq!(momentum_alpha(&cs(&[0.3, 0.3, 0.3])).unwrap().values(), &[1.0, 1.0, 1.0]);
        let a = momentum_alpha(&cs(&[-0.1, 0.1])).unwrap();
        assert_eq!(a.values()[0], 1.0);
        assert_relative_eq!(a.values()[1], std::f64::consts::E, max_relative = 1e-12);
        let mut wild = vec![0.0; 200];
        wild[0] = 1e6;
        let a = momentum_alpha(&cs(&wild)).unwrap();
        assert!(a.values().iter().all(|v| *v <= 6f64.exp()));
    }

    #[test]
    fn sharpe_alpha_examples() {
        assert_eq!(sharpe_alpha(&cs(&[0.4, 0.4])).unwrap().values(), &[1.0, 1.0]);
        let a = sharpe_alpha(&cs(&[-1.0, 1.0])).unwrap();
        assert_eq!(a.values()[0], 1.0);
        assert_relative_eq!(a.values()[1], 1.0, max_relative = 1e-12);
        // one outlier among many identical values has z = sqrt(m - 1)
        let mut v = vec![0.0; 101];
        v[0] = 1.0;
        let a = sharpe_alpha(&cs(&v)).unwrap();
        assert_eq!(a.values()[0], 6.0);
    }

    #[test]
    fn compound_alpha_examples() {
        let mom = AlphaVector::new(vec![1.0, 4.0]).unwrap();
        let sh = AlphaVector::new(vec![4.0, 1.0]).unwrap();
        assert_eq!(compound_alpha(&mom, &sh).unwrap().values(), &[2.0, 2.0]);
        let same = AlphaVector::new(vec![1.5, 3.0, 9.0]).unwrap();
        for (a, b) in compound_alpha(&same, &same).unwrap().values().iter().zip(same.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
        let ones = AlphaVector::ones(3).unwrap();
        assert_eq!(compound_alpha(&ones, &ones).unwrap().values(), &[1.0, 1.0, 1.0]);
        assert!(compound_alpha(&ones, &mom).is_err());
    }

    /// Reference EWMA via the recursive form `num = r + d·num`, `den = 1 + d·den`.
    fn reference_sharpe(series: &[f64], span: usize) -> f64 {
        let d = (span as f64 - 1.0) / (span as f64 + 1.0);
        let (mut num, mut den) = (0.0, 0.0);
        for r in series {
            num = r + d * num;
            den = 1.0 + d * den;
        }
        let start = series.len().saturating_sub(span);
        let w = &series[start..];
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let ss: f64 = w.iter().map(|r| r * r).sum::<f64>() - n * mean * mean;
        let std = (ss / (n - 1.0)).max(0.0).sqrt().max(1e-8);
        num / den / std
    }

    #[test]
    fn rolling_sharpe_examples() {
        let constant = vec![vec![0.01; 12]];
        let s = rolling_sharpe(&constant, 10).unwrap();
        assert_relative_eq!(s.values.values()[0], 0.01 / 1e-8, max_relative = 1e-12);

        let zero = vec![vec![0.0; 12]];
        assert_eq!(rolling_sharpe(&zero, 10).unwrap().values.values(), &[0.0]);

        let alternating: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let s = rolling_sharpe(&[alternating.clone()], 10).unwrap();
        let reference = reference_sharpe(&alternating, 10);
        assert!((s.values.values()[0] - reference).abs() <= 1e-12, "{} vs {reference}", s.values.values()[0]);

        let short = vec![vec![0.02], vec![0.01, 0.03]];
        let s = rolling_sharpe(&short, 10).unwrap();
        assert_eq!(s.insufficient, vec![0]);
        assert_eq!(s.values.values()[0], 0.0);
    }

    #[test]
    fn rolling_sharpe_matches_reference_on_long_history() {
        let series: Vec<f64> = (0..57).map(|i| ((i * 37 % 19) as f64 - 9.0) / 300.0).collect();
        for span in [2, 5, 10, 30] {
            let s = rolling_sharpe(&[series.clone()], span).unwrap().values.values()[0];
            let r = reference_sharpe(&series, span);
            assert!((s - r).abs() <= 1e-12 * r.abs().max(1.0), "span {span}: {s} vs {r}");
        }
    }

    #[test]
    fn alpha_for_dispatch() {
        let rows = vec![vec![10.0, 20.0, 40.0]];
        let h = PriceHistory::new(&rows).unwrap();
        assert_eq!(alpha_for(FactorKind::Uniform, &h, 10).unwrap().values(), &[1.0, 1.0, 1.0]);
        assert_eq!(alpha_for(FactorKind::Size, &h, 10).unwrap().values(), &[4.0, 2.0, 1.0]);
        assert!(matches!(
            alpha_for(FactorKind::Sharpe, &h, 10),
            Err(Error::InsufficientHistory { need: 2, have: 0, .. })
        ));

        let rows = vec![
            vec![10.0, 20.0, 40.0],
            vec![11.0, 19.0, 41.0],
            vec![12.5, 18.0, 40.0],
            vec![12.0, 18.5, 42.0],
        ];
        let h = PriceHistory::new(&rows).unwrap();
        let compound = alpha_for(FactorKind::Compound, &h, 10).unwrap();
        let mom = alpha_for(FactorKind::Momentum, &h, 10).unwrap();
        let sharpe = alpha_for(FactorKind::Sharpe, &h, 10).unwrap();
        for j in 0..3 {
            assert_relative_eq!(compound.values()[j], (mom.values()[j] * sharpe.values()[j]).sqrt(), max_relative = 1e-15);
        }
        // asset 0 has the best cumulative return
        assert!(mom.values()[0] > mom.values()[1]);
    }

    #[test]
    fn factor_names_round_trip() {
        for k in FactorKind::ALL {
            assert_eq!(k.name().parse::<FactorKind>().unwrap(), k);
        }
        let err = "value".parse::<FactorKind>().unwrap_err().to_string();
        assert!(err.contains("uniform, size, momentum, sharpe, compound"));
    }

    proptest! {
        #[test]
        fn alphas_strictly_positive(
            v in prop::collection::vec(-5.0f64..5.0, 2..40),
            constant in any::<bool>(),
        ) {
            let v = if constant { vec![v[0]; v.len()] } else { v };
            let c = cs(&v);
            let mom = momentum_alpha(&c).unwrap();
            let sh = sharpe_alpha(&c).unwrap();
            let comp = compound_alpha(&mom, &sh).unwrap();
            for a in [&mom, &sh, &comp] {
                prop_assert!(a.values().iter().all(|x| *x >= 1.0 && x.is_finite()));
            }
            prop_assert!(mom.values().iter().all(|x| *x <= 6f64.exp()));
            prop_assert!(sh.values().iter().all(|x| *x <= 6.0));
        }

        #[test]
        fn zscore_is_affine_invariant(
            v in prop::collection::vec(-1.0f64..1.0, 2..30),
            a in 0.1f64..10.0,
            c in -5.0f64..5.0,
        ) {
            let z = zscore(&cs(&v));
            let moved: Vec<f64> = v.iter().map(|x| a * x + c).collect();
            let zm = zscore(&cs(&moved));
            for (p, q) in z.values().iter().zip(zm.values()) {
                prop_assert!((p - q).abs() <= 1e-8);
            }
        }

        #[test]
        fn zscore_standardizes(v in prop::collection::vec(-1.0f64..1.0, 2..30)) {
            let z = zscore(&cs(&v));
            let m = v.len() as f64;
            let mean = z.values().iter().sum::<f64>() / m;
            prop_assert!(mean.abs() < 1e-10);
            let var = z.values().iter().map(|x| x * x).sum::<f64>() / m;
            prop_assert!(var.abs() < 1e-10 || (var - 1.0).abs() < 1e-10);
        }

        #[test]
        fn factor_alphas_are_monotone(
            v in prop::collection::vec(-1.0f64..1.0, 2..20),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..2.0,
        ) {
            let j = idx.index(v.len());
            let mut raised = v.clone();
            raised[j] += bump;
            let before_m = momentum_alpha(&cs(&v)).unwrap().values()[j];
            let after_m = momentum_alpha(&cs(&raised)).unwrap().values()[j];
            prop_assert!(after_m >= before_m - 1e-9);
            let before_s = sharpe_alpha(&cs(&v)).unwrap().values()[j];
            let after_s = sharpe_alpha(&cs(&raised)).unwrap().values()[j];
            prop_assert!(after_s >= before_s - 1e-9);
        }

        #[test]
        fn size_alpha_inverse_monotone(
            p in prop::collection::vec(0.5f64..500.0, 2..20),
            idx in any::<prop::sample::Index>(),
            bump in 0.0f64..100.0,
        ) {
            let a = size_alpha(&cs(&p)).unwrap();
            prop_assert_eq!(a.values().iter().copied().fold(f64::INFINITY, f64::min), 1.0);
            let j = idx.index(p.len());
            let mut q = p.clone();
            q[j] += bump;
            let b = size_alpha(&cs(&q)).unwrap();
            // the ratio of asset j to any other asset can only fall
            for k in 0..p.len() {
                if k != j {
                    prop_assert!(b.values()[j] / b.values()[k] <= a.values()[j] / a.values()[k] * (1.0 + 1e-12));
                }
            }
        }
    }
}
