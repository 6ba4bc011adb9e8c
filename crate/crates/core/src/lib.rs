//! Factor-tilted Dirichlet universal portfolios.
//!
//! A universal portfolio averages every constant-rebalanced portfolio on the
//! simplex, weighting each by the wealth it would have earned. This crate
//! approximates that average with an ensemble of Dirichlet-sampled
//! "managers" whose concentration vector is tilted by cross-sectional price
//! factors (size, momentum, Sharpe, or a blend), and provides:
//!
//! * [`simplex`]: portfolios, concentration vectors, seeded Dirichlet sampling
//! * [`wealth`]: per-period returns, manager ensembles, universal weights,
//!   growth rates and the best constant-rebalanced portfolio
//! * [`alphas`]: the factor transforms that produce concentration vectors
//! * [`markets`]: synthetic one- and two-factor markets and the closed-form
//!   growth identities and dominance bounds they satisfy
//! * [`verify`]: randomized suites over those identities
//! * [`ingest`]: CSV price panels, weekly median resampling, universe filters
//! * [`backtest`]: the end-to-end strategy loop and strategy comparison
//! * [`synthetic`]: daily price panels generated from factor markets

pub mod alphas;
pub mod backtest;
pub mod error;
pub mod ingest;
pub mod markets;
pub mod simplex;
pub mod synthetic;
pub mod verify;
pub mod wealth;

pub use alphas::{alpha_for, CrossSection, FactorKind, PriceHistory};
pub use backtest::{
    compare_strategies, metrics, prepare_market, run_backtest, run_prepared, BacktestConfig, BacktestResult, Comparison,
    Metrics, PreparedMarket, Resample,
};
pub use error::{Error, Result};
pub use ingest::{filter_universe, load_prices, read_prices, resample_weekly_median, save_prices, to_relative_prices, write_prices, PricePanel};
pub use markets::{FactorExposures, FactorReturnsSeries, LogNormalFactor};
pub use simplex::{normalize_to_simplex, sample_dirichlet, AlphaVector, Portfolio, RngStream};
pub use synthetic::{gen_synthetic_market, gen_synthetic_panel, FactorModel, SyntheticSpec};
pub use wealth::{universal_weights, ManagerEnsemble, RelativePrice, WealthSeries};
