//! Score-function Monte-Carlo gradient estimators.
//!
//! Both estimators target `grad_theta E_{p(z)}[f(z, x)]` for a black-box
//! scalar objective `f` — no differentiability of `f` is required, only
//! point evaluations on sampled masks.
//!
//! - [`sfess_grad`]: vanilla estimator, `(1/M) sum_j score(z_j) f(z_j, x)`.
//! - [`sfess_v_grad`]: leave-one-out control variate; each sample's objective
//!   is centered by the mean of the other M-1 samples' objectives, reusing
//!   the same M evaluations. Unbiased, and exactly zero for constant `f`.
//! - [`batch_grad`]: averages per-example estimates over a batch; the
//!   Poisson binomial normalizer and its gradient live in the distribution's
//!   cache, so they are computed once and shared across all examples and
//!   samples.

use rand::Rng;

use crate::error::{Error, Result};
use crate::subset::{SubsetDistribution, SubsetMask};

/// A scalar objective evaluated on (mask, example) pairs.
///
/// Implemented for any plain closure `Fn(&SubsetMask, &X) -> f64`; implement
/// the trait directly when evaluation can fail.
pub trait Objective<X> {
    fn evaluate(&self, mask: &SubsetMask, example: &X) -> Result<f64>;
}

impl<X, F> Objective<X> for F
where
    F: Fn(&SubsetMask, &X) -> f64,
{
    fn evaluate(&self, mask: &SubsetMask, example: &X) -> Result<f64> {
        Ok(self(mask, example))
    }
}

/// Which score-function estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreEstimator {
    Sfess,
    SfessV,
}

/// A Monte-Carlo gradient estimate together with the losses that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    /// Estimate of `grad_theta E[f]`, length n.
    pub grad: Vec<f64>,
    /// Total number of (mask, example) evaluations that went in.
    pub samples_used: usize,
    /// Objective value per evaluation, in draw order.
    pub per_sample_losses: Vec<f64>,
}

fn evaluate<X, O: Objective<X>>(f: &O, z: &SubsetMask, x: &X) -> Result<f64> {
    f.evaluate(z, x).map_err(|e| Error::Objective {
        mask: z.indices(),
        source: Box::new(e),
    })
}

/// Vanilla score-function estimator with M i.i.d. subset samples.
pub fn sfess_grad<X, O, R>(
    dist: &SubsetDistribution,
    f: &O,
    x: &X,
    m: usize,
    rng: &mut R,
) -> Result<GradEstimate>
where
    O: Objective<X>,
    R: Rng + ?Sized,
{
    if m < 1 {
        return Err(Error::TooFewSamples { got: m, min: 1 });
    }
    let n = dist.n();
    let mut grad = vec![0.0; n];
    let mut losses = Vec::with_capacity(m);
    for _ in 0..m {
        let z = dist.sample(rng);
        let score = dist.score(&z)?;
        let loss = evaluate(f, &z, x)?;
        losses.push(loss);
        for (g, s) in grad.iter_mut().zip(&score) {
            *g += s * loss;
        }
    }
    let inv = 1.0 / m as f64;
    for g in &mut grad {
        *g *= inv;
    }
    Ok(GradEstimate {
        grad,
        samples_used: m,
        per_sample_losses: losses,
    })
}

/// Control-variate estimator: each sample's objective is centered by the
/// leave-one-out mean of the other samples' objectives.
///
/// The centering is computed as a sum of pairwise differences,
/// `d_j = (1/(M-1)) sum_{l != j} (f_j - f_l)`, so a constant objective
/// yields an exactly zero gradient on every draw, not just in expectation.
/// `f` is evaluated exactly M times.
pub fn sfess_v_grad<X, O, R>(
    dist: &SubsetDistribution,
    f: &O,
    x: &X,
    m: usize,
    rng: &mut R,
) -> Result<GradEstimate>
where
    O: Objective<X>,
    R: Rng + ?Sized,
{
    if m < 2 {
        return Err(Error::TooFewSamples { got: m, min: 2 });
    }
    let n = dist.n();
    let mut scores = Vec::with_capacity(m);
    let mut losses = Vec::with_capacity(m);
    for _ in 0..m {
        let z = dist.sample(rng);
        scores.push(dist.score(&z)?);
        losses.push(evaluate(f, &z, x)?);
    }
    let mut grad = vec![0.0; n];
    for j in 0..m {
        let mut centered = 0.0;
        for (l, loss) in losses.iter().enumerate() {
            if l != j {
                centered += losses[j] - loss;
            }
        }
        centered /= (m - 1) as f64;
        for (g, s) in grad.iter_mut().zip(&scores[j]) {
            *g += s * centered;
        }
    }
    let inv = 1.0 / m as f64;
    for g in &mut grad {
        *g *= inv;
    }
    Ok(GradEstimate {
        grad,
        samples_used: m,
        per_sample_losses: losses,
    })
}

/// Batch estimator: the mean of per-example estimates, i.e. the
/// `1/(N*M)` double sum over examples and subset samples. Fresh subsets are
/// drawn for every example; the normalizer cache is shared through `dist`.
pub fn batch_grad<X, O, R>(
    dist: &SubsetDistribution,
    f: &O,
    batch: &[X],
    m: usize,
    kind: ScoreEstimator,
    rng: &mut R,
) -> Result<GradEstimate>
where
    O: Objective<X>,
    R: Rng + ?Sized,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = dist.n();
    let mut grad = vec![0.0; n];
    let mut losses = Vec::with_capacity(batch.len() * m);
    for x in batch {
        let est = match kind {
            ScoreEstimator::Sfess => sfess_grad(dist, f, x, m, rng)?,
            ScoreEstimator::SfessV => sfess_v_grad(dist, f, x, m, rng)?,
        };
        for (g, e) in grad.iter_mut().zip(&est.grad) {
            *g += e;
        }
        losses.extend(est.per_sample_losses);
    }
    let inv = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= inv;
    }
    Ok(GradEstimate {
        grad,
        samples_used: batch.len() * m,
        per_sample_losses: losses,
    })
}
