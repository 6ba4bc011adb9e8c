//! Points on the unit simplex, Dirichlet concentration vectors and the
//! seeded sampler that connects them.
//!
//! Randomness comes from [`RngStream`], a `(master_seed, stream_id)` pair that
//! maps onto an independent ChaCha8 stream. Managers in an ensemble each own
//! one stream, so samples never depend on how work is split across threads.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardUniform};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Tolerance on `|Σb − 1|` accepted by [`Portfolio::new`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Normalized components below this are treated as exact zeros.
pub const CLAMP_FLOOR: f64 = 1e-300;

/// A long-only, fully invested allocation `b` with `b_j ≥ 0` and `Σ b_j = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    /// Validates weights that are already on the simplex.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidPortfolio(format!(
                "need at least 2 assets, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidPortfolio(format!("component {w} is not a finite non-negative weight")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidPortfolio(format!("weights sum to {sum}")));
        }
        Ok(Portfolio(weights))
    }

    /// The equal-weight portfolio `(1/m, …, 1/m)`.
    pub fn uniform(m: usize) -> Result<Self> {
        normalize_to_simplex(&vec![1.0; m])
    }

    /// The vertex `e_k` of an `m`-asset simplex.
    pub fn vertex(m: usize, k: usize) -> Result<Self> {
        if k >= m {
            return Err(Error::InvalidArgument(format!("vertex {k} out of range for {m} assets")));
        }
        let mut w = vec![0.0; m];
        w[k] = 1.0;
        Portfolio::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `bᵀv`, checking dimensions.
    pub fn dot(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.0.len() {
            return Err(Error::DimensionMismatch { expected: self.0.len(), got: v.len() });
        }
        Ok(self.0.iter().zip(v).map(|(b, x)| b * x).sum())
    }
}

impl AsRef<[f64]> for Portfolio {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Display for Portfolio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

/// Strictly positive, finite Dirichlet concentration parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaVector(Vec<f64>);

impl AlphaVector {
    pub fn new(concentrations: Vec<f64>) -> Result<Self> {
        if concentrations.len() < 2 {
            return Err(Error::InvalidAlpha(format!(
                "need at least 2 components, got {}",
                concentrations.len()
            )));
        }
        if let Some((j, a)) = concentrations
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a <= 0.0)
        {
            return Err(Error::InvalidAlpha(format!("component {j} is {a}")));
        }
        Ok(AlphaVector(concentrations))
    }

    /// `(1, …, 1)`, the uniform law on the simplex.
    pub fn ones(m: usize) -> Result<Self> {
        AlphaVector::new(vec![1.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `α / Σα`, the mean of `Dirichlet(α)`.
    pub fn mean(&self) -> Portfolio {
        normalize_to_simplex(&self.0).expect("alpha components are positive")
    }
}

/// A deterministic random substream identified by `(master_seed, stream_id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

/// Bits of the stream id reserved for the manager index in [`RngStream::for_manager`].
const MANAGER_BITS: u32 = 40;

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id }
    }

    /// Stream owned by manager `index` in sampling round `epoch`.
    ///
    /// Packs `epoch` into the high 24 bits and `index` into the low 40 bits, so
    /// ids are collision free for `epoch < 2^24` and `index < 2^40`.
    pub fn for_manager(master_seed: u64, epoch: u64, index: u64) -> Self {
        debug_assert!(epoch < 1 << (64 - MANAGER_BITS));
        debug_assert!(index < 1 << MANAGER_BITS);
        RngStream::new(master_seed, (epoch << MANAGER_BITS) | index)
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Precomputed Gamma samplers for one concentration vector.
///
/// Each component is drawn in log space. Shapes below one use the boost
/// `Gamma(a) = Gamma(a + 1) · U^(1/a)`, which keeps tiny concentrations from
/// underflowing every component to zero.
#[derive(Clone, Debug)]
pub struct DirichletSampler {
    alpha: AlphaVector,
    gammas: Vec<(Gamma<f64>, Option<f64>)>,
}

impl DirichletSampler {
    pub fn new(alpha: &AlphaVector) -> Self {
        let gammas = alpha
            .values()
            .iter()
            .map(|&a| {
                if a < 1.0 {
                    (Gamma::new(a + 1.0, 1.0).expect("shape is positive"), Some(1.0 / a))
                } else {
                    (Gamma::new(a, 1.0).expect("shape is positive"), None)
                }
            })
            .collect();
        DirichletSampler { alpha: alpha.clone(), gammas }
    }

    pub fn alpha(&self) -> &AlphaVector {
        &self.alpha
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Portfolio {
        let logs: Vec<f64> = self
            .gammas
            .iter()
            .map(|(gamma, inv_shape)| {
                let g: f64 = gamma.sample(rng);
                match inv_shape {
                    Some(inv) => {
                        // open interval (0, 1]
                        let u: f64 = 1.0 - rng.sample::<f64, _>(StandardUniform);
                        g.ln() + u.ln() * inv
                    }
                    None => g.ln(),
                }
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        clamp_and_normalize(unnormalized)
    }
}

/// Draws `count` portfolios from `Dirichlet(alpha)` on a single stream.
pub fn sample_dirichlet(alpha: &AlphaVector, count: usize, stream: &RngStream) -> Result<Vec<Portfolio>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let sampler = DirichletSampler::new(alpha);
    let mut rng = stream.rng();
    Ok((0..count).map(|_| sampler.sample(&mut rng)).collect())
}

/// Draws one portfolio per manager, manager `k` using
/// `RngStream::for_manager(master_seed, epoch, k)`.
///
/// Output is identical for any rayon pool size.
pub fn sample_managers(alpha: &AlphaVector, count: usize, master_seed: u64, epoch: u64) -> Result<Vec<Portfolio>> {
    if count == 0 {
        return Err(Error::InvalidArgument("manager count must be at least 1".into()));
    }
    let sampler = DirichletSampler::new(alpha);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|k| sampler.sample(&mut RngStream::for_manager(master_seed, epoch, k).rng()))
        .collect())
}

/// `v / Σv` for a non-negative vector with at least one positive entry.
pub fn normalize_to_simplex(v: &[f64]) -> Result<Portfolio> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::DegenerateVector(format!("component {x} is not finite and non-negative")));
    }
    if !v.iter().any(|x| *x > 0.0) {
        return Err(Error::DegenerateVector("all components are zero".into()));
    }
    if v.len() < 2 {
        return Err(Error::InvalidPortfolio(format!("need at least 2 assets, got {}", v.len())));
    }
    Ok(clamp_and_normalize(v.to_vec()))
}

fn clamp_and_normalize(mut v: Vec<f64>) -> Portfolio {
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    if v.iter().any(|x| *x < CLAMP_FLOOR && *x != 0.0) {
        v.iter_mut().filter(|x| **x < CLAMP_FLOOR).for_each(|x| *x = 0.0);
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= sum);
    }
    Portfolio(v)
}
