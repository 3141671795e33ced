//! Sample-free epistemic-uncertainty estimation for ensembles of
//! Gaussian-output regressors.
//!
//! The central objects are [`gaussian::MultivariateGaussian`] (a Gaussian
//! predictive distribution with closed-form entropy and pairwise distances)
//! and [`ensemble::ConditionalMixture`] (the weighted mixture an ensemble
//! emits for one input). On top of those, [`ensemble`] provides two routes
//! to the mixture's entropy and mutual information:
//!
//! * a Monte-Carlo estimator that samples from the mixture, and
//! * pairwise-distance estimators that aggregate closed-form KL,
//!   Bhattacharyya, or Chernoff-α distances between component pairs and
//!   need no samples at all.
//!
//! The remaining modules turn the estimators into experiments: [`pne`]
//! trains small probabilistic network ensembles, [`data`] generates the
//! synthetic benchmarks and ingests CSV datasets, [`active`] runs the
//! pool-based active-learning protocol, [`stats`] compares strategies with
//! Welch's t-test under Holm–Bonferroni correction, and [`bench`] times the
//! estimators against each other.

pub mod active;
pub mod bench;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod gaussian;
pub mod pne;
pub mod stats;
pub(crate) mod seed;

pub use error::{Error, Result};
