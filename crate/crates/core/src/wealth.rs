//! Wealth processes over relative-price sequences.
//!
//! Manager wealth is carried as log wealth; the universal portfolio is the
//! wealth-weighted mean of manager portfolios, evaluated softmax-style.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simplex::{normalize_to_simplex, Portfolio};

/// Default objective tolerance for [`best_crp`].
pub const BEST_CRP_TOL: f64 = 1e-10;
/// Iteration cap for [`best_crp`].
pub const BEST_CRP_MAX_ITER: usize = 10_000;

/// Gross one-period returns `price_next / price_current`, all positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativePrice(Vec<f64>);

impl RelativePrice {
    pub fn new(ratios: Vec<f64>) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidRelativePrice("empty vector".into()));
        }
        if let Some((j, x)) = ratios.iter().enumerate().find(|(_, x)| !x.is_finite() || **x <= 0.0) {
            return Err(Error::InvalidRelativePrice(format!("component {j} is {x}")));
        }
        Ok(RelativePrice(ratios))
    }

    pub fn ones(m: usize) -> Self {
        RelativePrice(vec![1.0; m])
    }

    pub fn ratios(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Time-ordered wealth, starting at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct WealthSeries(Vec<f64>);

impl WealthSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&1.0) {
            return Err(Error::InvalidArgument("wealth series must start at 1.0".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidArgument(format!("wealth value {v} is not positive and finite")));
        }
        Ok(WealthSeries(values))
    }

    /// Builds the series `exp(log_wealth)` where `log_wealth[0] == 0`.
    pub fn from_log(log_wealth: &[f64]) -> Result<Self> {
        WealthSeries::new(log_wealth.iter().map(|l| l.exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terminal(&self) -> f64 {
        *self.0.last().expect("series is non-empty")
    }

    /// Number of periods, one less than the number of points.
    pub fn periods(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

/// `bᵀx`.
pub fn period_return(b: &Portfolio, x: &RelativePrice) -> Result<f64> {
    let r = b.dot(x.ratios())?;
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::NonPositiveReturn { period: 0, value: r });
    }
    Ok(r)
}

/// `Σ_i log(bᵀx_i)`. Zero for an empty sequence.
pub fn cumulative_log_wealth(b: &Portfolio, xs: &[RelativePrice]) -> Result<f64> {
    let mut total = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let r = period_return(b, x).map_err(|e| match e {
            Error::NonPositiveReturn { value, .. } => Error::NonPositiveReturn { period: i, value },
            e => e,
        })?;
        total += r.ln();
    }
    Ok(total)
}

/// `S_n(b, xⁿ) = Π_i bᵀx_i`.
///
/// An empty sequence is the empty product and yields `1.0`.
pub fn cumulative_wealth(b: &Portfolio, xs: &[RelativePrice]) -> Result<f64> {
    cumulative_log_wealth(b, xs).map(f64::exp)
}

/// Empirical mean of `log(bᵀx)` over `xs`.
pub fn expected_log_growth(b: &Portfolio, xs: &[RelativePrice]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }
    Ok(cumulative_log_wealth(b, xs)? / xs.len() as f64)
}

/// `(1/n) log(W_n / W_0)`.
pub fn average_growth_rate(ws: &WealthSeries) -> Result<f64> {
    if ws.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: ws.len() });
    }
    let v = ws.values();
    Ok((v[v.len() - 1] / v[0]).ln() / ws.periods() as f64)
}

/// A set of sampled managers and their cumulative wealth.
#[derive(Clone, Debug, PartialEq)]
pub struct ManagerEnsemble {
    portfolios: Vec<Portfolio>,
    log_wealth: Vec<f64>,
    periods_seen: usize,
}

impl ManagerEnsemble {
    /// Managers starting at wealth 1.
    pub fn new(portfolios: Vec<Portfolio>) -> Result<Self> {
        let n = portfolios.len();
        ManagerEnsemble::with_log_wealth(portfolios, vec![0.0; n], 0)
    }

    pub fn with_wealth(portfolios: Vec<Portfolio>, wealth: &[f64]) -> Result<Self> {
        if let Some(w) = wealth.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::InvalidArgument(format!("manager wealth {w} is not positive")));
        }
        ManagerEnsemble::with_log_wealth(portfolios, wealth.iter().map(|w| w.ln()).collect(), 0)
    }

    pub fn with_log_wealth(portfolios: Vec<Portfolio>, log_wealth: Vec<f64>, periods_seen: usize) -> Result<Self> {
        if portfolios.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if portfolios.len() != log_wealth.len() {
            return Err(Error::DimensionMismatch { expected: portfolios.len(), got: log_wealth.len() });
        }
        let m = portfolios[0].dim();
        if let Some(p) = portfolios.iter().find(|p| p.dim() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: p.dim() });
        }
        if let Some(l) = log_wealth.iter().find(|l| !l.is_finite()) {
            return Err(Error::InvalidArgument(format!("manager log wealth {l} is not finite")));
        }
        Ok(ManagerEnsemble { portfolios, log_wealth, periods_seen })
    }

    pub fn len(&self) -> usize {
        self.portfolios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.portfolios.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.portfolios[0].dim()
    }

    pub fn periods_seen(&self) -> usize {
        self.periods_seen
    }

    pub fn portfolios(&self) -> &[Portfolio] {
        &self.portfolios
    }

    pub fn log_wealth(&self) -> &[f64] {
        &self.log_wealth
    }

    pub fn wealth(&self) -> Vec<f64> {
        self.log_wealth.iter().map(|l| l.exp()).collect()
    }

    /// Log of the ensemble-average wealth, `log((1/N) Σ_k S_k)`.
    pub fn log_mean_wealth(&self) -> f64 {
        log_mean_exp(&self.log_wealth)
    }

    /// Multiplies every manager's wealth by its return on `x`.
    pub fn advance(&mut self, x: &RelativePrice) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        let period = self.periods_seen;
        self.portfolios
            .par_iter()
            .zip(self.log_wealth.par_iter_mut())
            .try_for_each(|(b, lw)| {
                let r = b.dot(x.ratios())?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::NonPositiveReturn { period, value: r });
                }
                *lw += r.ln();
                Ok::<_, Error>(())
            })?;
        self.periods_seen += 1;
        Ok(())
    }
}

/// Applies one period of returns to every manager.
pub fn update_ensemble(mut e: ManagerEnsemble, x: &RelativePrice) -> Result<ManagerEnsemble> {
    e.advance(x)?;
    Ok(e)
}

/// `w = Σ_k S_k b_k / Σ_k S_k`.
///
/// Wealths are rescaled by the largest one before exponentiation, and the sums
/// run in manager order so the result does not depend on thread count.
pub fn universal_weights(e: &ManagerEnsemble) -> Result<Portfolio> {
    if e.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let max = e.log_wealth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = e.dim();
    let mut acc = vec![0.0; m];
    let mut total = 0.0;
    for (b, lw) in e.portfolios.iter().zip(&e.log_wealth) {
        let s = (lw - max).exp();
        total += s;
        for (a, w) in acc.iter_mut().zip(b.weights()) {
            *a += s * w;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    // a convex combination is already on the simplex up to rounding
    Portfolio::new(acc.clone()).or_else(|_| normalize_to_simplex(&acc))
}

/// `log((1/N) Σ exp(l_k))`, evaluated stably.
pub fn log_mean_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    max + sum.ln() - (logs.len() as f64).ln()
}

/// `Σ_i log(bᵀx_i)` for a raw weight slice (no simplex check).
fn crp_objective(b: &[f64], xs: &[RelativePrice]) -> f64 {
    xs.iter()
        .map(|x| b.iter().zip(x.ratios()).map(|(w, r)| w * r).sum::<f64>().ln())
        .sum()
}

fn crp_gradient(b: &[f64], xs: &[RelativePrice]) -> Vec<f64> {
    let mut g = vec![0.0; b.len()];
    for x in xs {
        let r: f64 = b.iter().zip(x.ratios()).map(|(w, r)| w * r).sum();
        for (gj, xj) in g.iter_mut().zip(x.ratios()) {
            *gj += xj / r;
        }
    }
    g
}

/// Euclidean projection onto the unit simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// The constant-rebalanced portfolio maximizing `Σ_i log(bᵀx_i)` in hindsight.
///
/// Projected gradient ascent with backtracking, interleaved with a Newton
/// step on the face spanned by the current support so that convergence does
/// not stall on ill-conditioned return histories. Terminates when the
/// Frank–Wolfe gap `max_j ∇_j − ∇ᵀb`, an upper bound on the distance to the
/// optimal objective, falls to `tol`.
pub fn best_crp(xs: &[RelativePrice], tol: f64) -> Result<Portfolio> {
    let Some(first) = xs.first() else {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    };
    let m = first.dim();
    if let Some(x) = xs.iter().find(|x| x.dim() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: x.dim() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }

    let mut b = Portfolio::uniform(m)?.into_inner();
    let mut f = crp_objective(&b, xs);
    let mut step = 1.0 / crp_gradient(&b, xs).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut gap = f64::INFINITY;

    for _ in 0..BEST_CRP_MAX_ITER {
        let g = crp_gradient(&b, xs);
        gap = frank_wolfe_gap(&g, &b);
        if gap <= tol {
            return normalize_to_simplex(&b);
        }
        let mut moved = false;
        if let Some((cand, fc)) = face_newton_step(&b, f, &g, xs) {
            b = cand;
            f = fc;
            moved = true;
        }
        let g = crp_gradient(&b, xs);
        if frank_wolfe_gap(&g, &b) <= tol {
            continue;
        }
        if let Some((cand, fc, accepted_step)) = projected_gradient_step(&b, f, &g, step, xs) {
            b = cand;
            f = fc;
            step = accepted_step * 2.0;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    Err(Error::NotConverged {
        iterations: BEST_CRP_MAX_ITER,
        gap,
        best: normalize_to_simplex(&b)?,
    })
}

fn frank_wolfe_gap(g: &[f64], b: &[f64]) -> f64 {
    let gb: f64 = g.iter().zip(b).map(|(gj, bj)| gj * bj).sum();
    g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - gb
}

fn projected_gradient_step(b: &[f64], f: f64, g: &[f64], mut step: f64, xs: &[RelativePrice]) -> Option<(Vec<f64>, f64, f64)> {
    // rounding slack so the test does not stall right at the optimum
    let slack = 4.0 * f64::EPSILON * f.abs().max(1.0);
    while step > 1e-300 {
        let trial: Vec<f64> = b.iter().zip(g).map(|(bj, gj)| bj + step * gj).collect();
        let cand = project_to_simplex(&trial);
        let diff: Vec<f64> = cand.iter().zip(b).map(|(c, bj)| c - bj).collect();
        let sq: f64 = diff.iter().map(|d| d * d).sum();
        if sq == 0.0 {
            return None;
        }
        let lin: f64 = g.iter().zip(&diff).map(|(gj, d)| gj * d).sum();
        let fc = crp_objective(&cand, xs);
        if fc >= f + lin - sq / (2.0 * step) - slack {
            return Some((cand, fc, step));
        }
        step *= 0.5;
    }
    None
}

/// Newton ascent direction on `{b_S : Σ b_S = 1}` for the support `S` of `b`,
/// followed by a ratio test and Armijo backtracking.
fn face_newton_step(b: &[f64], f: f64, g: &[f64], xs: &[RelativePrice]) -> Option<(Vec<f64>, f64)> {
    let support: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let k = support.len();
    if k < 2 {
        return None;
    }
    // KKT system [H 1; 1ᵀ 0] [d; λ] = [−g; 0] with H = −Σ x xᵀ / (bᵀx)²
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for x in xs {
        let r: f64 = b.iter().zip(x.ratios()).map(|(w, v)| w * v).sum();
        let inv = 1.0 / (r * r);
        for (p, &i) in support.iter().enumerate() {
            for (q, &j) in support.iter().enumerate() {
                kkt[(p, q)] -= x.ratios()[i] * x.ratios()[j] * inv;
            }
        }
    }
    let scale = (0..k).map(|p| kkt[(p, p)].abs()).fold(0.0f64, f64::max).max(1e-300);
    for p in 0..k {
        kkt[(p, p)] -= 1e-12 * scale;
        kkt[(p, k)] = 1.0;
        kkt[(k, p)] = 1.0;
        rhs[p] = -g[support[p]];
    }
    let sol = kkt.lu().solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite()))?;
    let mut d = vec![0.0; b.len()];
    for (p, &j) in support.iter().enumerate() {
        d[j] = sol[p];
    }
    let slope: f64 = g.iter().zip(&d).map(|(gj, dj)| gj * dj).sum();
    if !(slope > 0.0) {
        return None;
    }
    let mut t_max = 1.0f64;
    let mut blocking = None;
    for &j in &support {
        if d[j] < 0.0 && -b[j] / d[j] < t_max {
            t_max = -b[j] / d[j];
            blocking = Some(j);
        }
    }
    let mut t = t_max;
    while t > 1e-12 {
        let mut cand: Vec<f64> = b.iter().zip(&d).map(|(bj, dj)| (bj + t * dj).max(0.0)).collect();
        if t == t_max {
            if let Some(j) = blocking {
                cand[j] = 0.0;
            }
        }
        let sum: f64 = cand.iter().sum();
        cand.iter_mut().for_each(|c| *c /= sum);
        let fc = crp_objective(&cand, xs);
        if fc > f && fc >= f + 1e-4 * t * slope {
            return Some((cand, fc));
        }
        t *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{sample_dirichlet, AlphaVector, RngStream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn p(w: &[f64]) -> Portfolio {
        Portfolio::new(w.to_vec()).unwrap()
    }

    fn x(r: &[f64]) -> RelativePrice {
        RelativePrice::new(r.to_vec()).unwrap()
    }

    #[test]
    fn period_return_examples() {
        assert_eq!(period_return(&p(&[1.0, 0.0]), &x(&[2.0, 0.5])).unwrap(), 2.0);
        assert_eq!(period_return(&p(&[0.5, 0.5]), &x(&[2.0, 0.5])).unwrap(), 1.25);
        assert_eq!(period_return(&p(&[0.2, 0.3, 0.5]), &RelativePrice::ones(3)).unwrap(), 1.0);
        assert!(matches!(
            period_return(&p(&[0.5, 0.5]), &x(&[1.0, 1.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn relative_price_rejects_non_positive() {
        assert!(RelativePrice::new(vec![1.0, 0.0]).is_err());
        assert!(RelativePrice::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn cumulative_wealth_examples() {
        assert_relative_eq!(cumulative_wealth(&p(&[1.0, 0.0]), &[x(&[2.0, 1.0]), x(&[2.0, 1.0])]).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(
            cumulative_wealth(&p(&[0.5, 0.5]), &[x(&[2.0, 0.5]), x(&[0.5, 2.0])]).unwrap(),
            1.5625,
            max_relative = 1e-15
        );
        assert_eq!(cumulative_wealth(&p(&[0.3, 0.7]), &vec![RelativePrice::ones(2); 5]).unwrap(), 1.0);
        assert_eq!(cumulative_wealth(&p(&[0.3, 0.7]), &[]).unwrap(), 1.0);
    }

    #[test]
    fn ensemble_update_examples() {
        let e = ManagerEnsemble::new(vec![p(&[1.0, 0.0])]).unwrap();
        let e = update_ensemble(e, &x(&[3.0, 1.0])).unwrap();
        assert_relative_eq!(e.wealth()[0], 3.0, max_relative = 1e-15);
        assert_eq!(e.periods_seen(), 1);

        let e = ManagerEnsemble::with_wealth(vec![p(&[0.2, 0.8]), p(&[0.9, 0.1])], &[1.5, 0.5]).unwrap();
        let after = update_ensemble(e.clone(), &RelativePrice::ones(2)).unwrap();
        assert_eq!(after.log_wealth(), e.log_wealth());

        let e = ManagerEnsemble::with_wealth(vec![p(&[0.5, 0.5])], &[2.0]).unwrap();
        let e = update_ensemble(e, &x(&[2.0, 0.5])).unwrap();
        assert_relative_eq!(e.wealth()[0], 2.5, max_relative = 1e-15);

        let e = ManagerEnsemble::new(vec![p(&[0.5, 0.5])]).unwrap();
        assert!(matches!(update_ensemble(e, &x(&[1.0, 1.0, 1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn universal_weights_examples() {
        let e = ManagerEnsemble::with_wealth(vec![p(&[1.0, 0.0]), p(&[0.0, 1.0])], &[2.0, 1.0]).unwrap();
        let w = universal_weights(&e).unwrap();
        assert_relative_eq!(w.weights()[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(w.weights()[1], 1.0 / 3.0, max_relative = 1e-15);

        let e = ManagerEnsemble::new(vec![p(&[0.2, 0.8]), p(&[0.6, 0.4])]).unwrap();
        let w = universal_weights(&e).unwrap();
        assert_relative_eq!(w.weights()[0], 0.4, max_relative = 1e-15);

        let e = ManagerEnsemble::with_wealth(vec![p(&[0.1, 0.9])], &[7.0]).unwrap();
        assert_eq!(universal_weights(&e).unwrap(), p(&[0.1, 0.9]));

        assert!(matches!(ManagerEnsemble::new(vec![]), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn universal_weights_survive_huge_log_wealth() {
        let e = ManagerEnsemble::with_log_wealth(vec![p(&[1.0, 0.0]), p(&[0.0, 1.0])], vec![5000.0, 5000.0 + 2f64.ln()], 0).unwrap();
        let w = universal_weights(&e).unwrap();
        assert_relative_eq!(w.weights()[1], 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn growth_rate_examples() {
        let ws = WealthSeries::new(vec![1.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(average_growth_rate(&ws).unwrap(), 2f64.ln(), max_relative = 1e-15);
        let ws = WealthSeries::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(average_growth_rate(&ws).unwrap(), 0.0);
        let ws = WealthSeries::new(vec![1.0, std::f64::consts::E]).unwrap();
        assert_relative_eq!(average_growth_rate(&ws).unwrap(), 1.0, max_relative = 1e-15);
        let ws = WealthSeries::new(vec![1.0]).unwrap();
        assert!(matches!(average_growth_rate(&ws), Err(Error::SeriesTooShort { .. })));
        assert!(WealthSeries::new(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn expected_log_growth_examples() {
        assert_relative_eq!(expected_log_growth(&p(&[1.0, 0.0]), &[x(&[2.0, 0.3]), x(&[2.0, 7.0])]).unwrap(), 2f64.ln());
        assert_eq!(expected_log_growth(&p(&[0.4, 0.6]), &vec![RelativePrice::ones(2); 3]).unwrap(), 0.0);
        assert_relative_eq!(
            expected_log_growth(&p(&[0.5, 0.5]), &[x(&[2.0, 0.5]), x(&[0.5, 2.0])]).unwrap(),
            1.25f64.ln(),
            max_relative = 1e-15
        );
        assert!(expected_log_growth(&p(&[0.5, 0.5]), &[]).is_err());
    }

    #[test]
    fn best_crp_dominant_asset_is_vertex() {
        let xs = vec![x(&[1.2, 1.0, 0.9]), x(&[1.1, 1.05, 1.0]), x(&[1.3, 0.8, 1.2])];
        let b = best_crp(&xs, BEST_CRP_TOL).unwrap();
        assert_relative_eq!(b.weights()[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn best_crp_symmetric_pair_is_half_half() {
        let xs: Vec<_> = (0..10).map(|i| if i % 2 == 0 { x(&[2.0, 0.5]) } else { x(&[0.5, 2.0]) }).collect();
        let b = best_crp(&xs, BEST_CRP_TOL).unwrap();
        assert_relative_eq!(b.weights()[0], 0.5, epsilon = 1e-6);
    }

    /// Oracle: exhaustive 0.001-resolution grid over the 3-asset simplex.
    #[test]
    fn best_crp_matches_grid_search() {
        let mut rng = RngStream::new(2024, 7).rng();
        let xs: Vec<_> = (0..10)
            .map(|_| x(&[rng.random_range(0.7..1.4), rng.random_range(0.7..1.4), rng.random_range(0.7..1.4)]))
            .collect();
        let tol = 1e-10;
        let b = best_crp(&xs, tol).unwrap();
        let fb = crp_objective(b.weights(), &xs);
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=1000 {
            for j in 0..=(1000 - i) {
                let w = [i as f64 / 1000.0, j as f64 / 1000.0, (1000 - i - j) as f64 / 1000.0];
                grid_best = grid_best.max(crp_objective(&w, &xs));
            }
        }
        assert!(fb >= grid_best - tol, "{fb} < {grid_best}");
        // the grid can only be slightly worse than the continuous optimum
        assert!(fb - grid_best < 1e-4);
    }

    #[test]
    fn best_crp_rejects_empty() {
        assert!(best_crp(&[], 1e-10).is_err());
    }

    #[test]
    fn projection_lands_on_simplex() {
        let v = project_to_simplex(&[0.3, 2.0, -1.0]);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
        let v = project_to_simplex(&[0.5, 0.5]);
        assert_eq!(v, vec![0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn log_wealth_is_sum_of_log_returns(
            seed in any::<u64>(),
            n in 1usize..200,
        ) {
            let mut rng = RngStream::new(seed, 1).rng();
            let xs: Vec<_> = (0..n).map(|_| x(&[rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)])).collect();
            let b = sample_dirichlet(&AlphaVector::ones(3).unwrap(), 1, &RngStream::new(seed, 2)).unwrap().remove(0);
            let direct: f64 = xs.iter().map(|x| period_return(&b, x).unwrap().ln()).sum();
            let via = cumulative_wealth(&b, &xs).unwrap().ln();
            prop_assert!((direct - via).abs() <= 1e-10 * direct.abs().max(1.0));
        }

        #[test]
        fn universal_weights_on_simplex_and_scale_invariant(
            seed in any::<u64>(),
            count in 1usize..40,
            scale in -50.0f64..50.0,
        ) {
            let ps = sample_dirichlet(&AlphaVector::new(vec![0.5, 1.0, 2.0, 3.0]).unwrap(), count, &RngStream::new(seed, 0)).unwrap();
            let mut rng = RngStream::new(seed, 1).rng();
            let lw: Vec<f64> = (0..count).map(|_| rng.random_range(-20.0..20.0)).collect();
            let shifted: Vec<f64> = lw.iter().map(|l| l + scale).collect();
            let a = universal_weights(&ManagerEnsemble::with_log_wealth(ps.clone(), lw, 0).unwrap()).unwrap();
            let b = universal_weights(&ManagerEnsemble::with_log_wealth(ps, shifted, 0).unwrap()).unwrap();
            prop_assert!((a.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (u, v) in a.weights().iter().zip(b.weights()) {
                prop_assert!((u - v).abs() <= 1e-13);
            }
        }

        #[test]
        fn best_crp_beats_random_points(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed, 3).rng();
            let xs: Vec<_> = (0..20).map(|_| x(&[rng.random_range(0.8..1.25), rng.random_range(0.8..1.25), rng.random_range(0.8..1.25), rng.random_range(0.8..1.25)])).collect();
            let tol = 1e-10;
            let b = best_crp(&xs, tol).unwrap();
            let fb = crp_objective(b.weights(), &xs);
            for q in sample_dirichlet(&AlphaVector::ones(4).unwrap(), 200, &RngStream::new(seed, 4)).unwrap() {
                prop_assert!(fb >= crp_objective(q.weights(), &xs) - tol);
            }
        }
    }
}
