//! Exact sampling and unbiased score-function gradient estimation for
//! k-subset distributions.
//!
//! A k-subset distribution conditions `n` independent Bernoulli variables on
//! their sum being exactly `k`, giving a distribution over the `C(n, k)`
//! binary masks with `k` ones that is parameterized by only `n` inclusion
//! probabilities. This crate provides:
//!
//! - [`poibin`]: Poisson binomial PMF numerics (DFT closed form, dynamic
//!   programming oracle, leave-one-out identities, analytic log-PMF
//!   gradients).
//! - [`subset`]: the conditional distribution itself — exact log-probability,
//!   score function, rejection-free exact sampling, marginals, and a
//!   brute-force enumeration oracle for small supports.
//! - [`estimators`]: score-function Monte-Carlo gradient estimators over a
//!   black-box objective, vanilla and with a leave-one-out control variate.
//! - [`baselines`]: relaxed top-k subset sampling with Gumbel noise, its
//!   straight-through variant, and the exponential temperature schedule.
//! - [`nn`]: a minimal feedforward network with explicit forward/backward
//!   passes and Adam, enough for desk-scale feature-selection objectives.
//! - [`experiments`]: dataset ingestion (IDX files, synthetic benchmarks),
//!   the training harness, metrics, and the estimator variance bench.

pub mod baselines;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod nn;
pub mod poibin;
pub mod subset;

pub use error::{Error, Result};
pub use poibin::{PmfVector, ProbVector};
pub use subset::{SubsetDistribution, SubsetMask};
