//! Estimator bias/variance bench on an enumerable problem.
//!
//! A fixed linear objective `f(z) = w . z` on a small random distribution
//! lets the exact gradient be computed by brute force, so each estimator's
//! empirical bias and covariance trace can be measured. Score-function
//! estimators report in theta space; the relaxed baselines differentiate
//! through their sampling path, so they report in logit space against the
//! chain-ruled exact gradient (their bias is expected to be nonzero and is
//! reported, not asserted away).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines;
use crate::error::{Error, Result};
use crate::estimators::{sfess_grad, sfess_v_grad};
use crate::poibin::ProbVector;
use crate::subset::{SubsetDistribution, SubsetMask};

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Temperature used by the relaxed baselines.
    pub tau: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            n: 8,
            k: 3,
            m: 5,
            trials: 10_000,
            seed: 0,
            tau: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub estimator: String,
    /// Parameter space of the reported gradient: "theta" or "logit".
    pub space: String,
    pub bias_max_abs: f64,
    /// Largest |bias| / standard-error ratio across coordinates.
    pub bias_max_z: f64,
    pub cov_trace: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub spec_n: usize,
    pub spec_k: usize,
    pub spec_m: usize,
    pub trials: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, estimator: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.estimator == estimator)
    }

    /// CSV rendering: header plus one row per estimator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,space,n,k,m,trials,bias_max_abs,bias_max_z,cov_trace\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.estimator,
                row.space,
                self.spec_n,
                self.spec_k,
                self.spec_m,
                self.trials,
                row.bias_max_abs,
                row.bias_max_z,
                row.cov_trace
            ));
        }
        out
    }
}

/// Exact `grad_theta E[f]` by central finite differences of the enumerated
/// expectation (step 1e-5). Fully independent of the score machinery.
pub fn exact_grad_enumerated(theta: &[f64], k: usize, weights: &[f64]) -> Result<Vec<f64>> {
    let expectation = |t: &[f64]| -> Result<f64> {
        let dist = SubsetDistribution::new(ProbVector::new(t.to_vec())?, k)?;
        let mut acc = 0.0;
        for (z, p) in dist.enumerate_support()? {
            acc += p * linear_objective(&z, weights);
        }
        Ok(acc)
    };
    let h = 1e-5;
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += h;
        down[j] -= h;
        grad.push((expectation(&up)? - expectation(&down)?) / (2.0 * h));
    }
    Ok(grad)
}

fn linear_objective(mask: &SubsetMask, weights: &[f64]) -> f64 {
    mask.bits()
        .iter()
        .zip(weights)
        .map(|(&b, w)| b as f64 * w)
        .sum()
}

struct Accumulator {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    count: usize,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sumsq: vec![0.0; n],
            count: 0,
        }
    }

    fn push(&mut self, estimate: &[f64]) {
        for i in 0..estimate.len() {
            self.sum[i] += estimate[i];
            self.sumsq[i] += estimate[i] * estimate[i];
        }
        self.count += 1;
    }

    fn finish(&self, estimator: &str, space: &str, exact: &[f64]) -> BenchRow {
        let t = self.count as f64;
        let mut bias_max_abs: f64 = 0.0;
        let mut bias_max_z: f64 = 0.0;
        let mut trace = 0.0;
        for i in 0..self.sum.len() {
            let mean = self.sum[i] / t;
            let var = (self.sumsq[i] / t - mean * mean).max(0.0);
            let se = (var / t).sqrt();
            let bias = mean - exact[i];
            bias_max_abs = bias_max_abs.max(bias.abs());
            if se > 0.0 {
                bias_max_z = bias_max_z.max(bias.abs() / se);
            }
            trace += var;
        }
        BenchRow {
            estimator: estimator.to_string(),
            space: space.to_string(),
            bias_max_abs,
            bias_max_z,
            cov_trace: trace,
        }
    }
}

/// Runs every estimator on the fixed linear-objective problem.
pub fn variance_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.n < 2 || spec.k == 0 || spec.k >= spec.n {
        return Err(Error::Config(format!(
            "bench needs 0 < k < n, got k={} n={}",
            spec.k, spec.n
        )));
    }
    if spec.m < 2 {
        return Err(Error::Config("bench needs m >= 2 for sfess_v".into()));
    }
    let mut setup_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta: Vec<f64> = (0..spec.n).map(|_| setup_rng.gen_range(0.2..0.8)).collect();
    let weights: Vec<f64> = (0..spec.n).map(|_| setup_rng.gen_range(0.5..1.5)).collect();
    let logits: Vec<f64> = theta.iter().map(|t| (t / (1.0 - t)).ln()).collect();

    let dist = SubsetDistribution::new(ProbVector::new(theta.clone())?, spec.k)?;
    let exact_theta = exact_grad_enumerated(&theta, spec.k, &weights)?;
    // Chain rule through theta = sigmoid(logit).
    let exact_logit: Vec<f64> = exact_theta
        .iter()
        .zip(&theta)
        .map(|(g, t)| g * t * (1.0 - t))
        .collect();

    let objective = {
        let w = weights.clone();
        move |z: &SubsetMask, _: &()| linear_objective(z, &w)
    };

    let mut rows = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let mut acc = Accumulator::new(spec.n);
    for _ in 0..spec.trials {
        acc.push(&sfess_grad(&dist, &objective, &(), spec.m, &mut rng)?.grad);
    }
    rows.push(acc.finish("sfess", "theta", &exact_theta));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
    let mut acc = Accumulator::new(spec.n);
    for _ in 0..spec.trials {
        acc.push(&sfess_v_grad(&dist, &objective, &(), spec.m, &mut rng)?.grad);
    }
    rows.push(acc.finish("sfess_v", "theta", &exact_theta));

    // Relaxed baseline: average M per-sample pathwise gradients with fresh
    // Gumbel noise per sample, mirroring the training loop. On a linear
    // objective the straight-through variant backpropagates the same weight
    // gradient, so one row covers both.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(3));
    let mut acc = Accumulator::new(spec.n);
    for _ in 0..spec.trials {
        let mut estimate = vec![0.0; spec.n];
        for _ in 0..spec.m {
            let (_, trace) =
                baselines::gumbel_topk_relaxed_traced(&logits, spec.k, spec.tau, &mut rng)?;
            let back = baselines::relaxed_logit_grad(&trace, &weights);
            for (e, b) in estimate.iter_mut().zip(&back) {
                *e += b / spec.m as f64;
            }
        }
        acc.push(&estimate);
    }
    rows.push(acc.finish("gs", "logit", &exact_logit));

    Ok(BenchReport {
        spec_n: spec.n,
        spec_k: spec.k,
        spec_m: spec.m,
        trials: spec.trials,
        rows,
    })
}
