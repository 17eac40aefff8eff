//! Poisson binomial distribution numerics.
//!
//! The Poisson binomial is the law of `S = sum_i b_i` for independent
//! Bernoulli variables `b_i ~ Bernoulli(theta_i)`. Three evaluation routes
//! are provided:
//!
//! - [`pmf_dft`]: the closed-form evaluation through a length-(n+1) discrete
//!   Fourier transform of the per-frequency products
//!   `prod_i (theta_i e^{2*pi*sqrt(-1)*l/(n+1)} + 1 - theta_i)`.
//! - [`pmf_dp`]: the O(n^2) convolution recurrence, kept as an independent
//!   oracle for the DFT route.
//! - [`pmf_leave_one_out`] and [`log_pmf_grad`]: leave-one-out PMFs and the
//!   exact gradient of `log P(S = k)`, via the identity
//!   `d P(S=k)/d theta_j = P(S_{-j} = k-1) - P(S_{-j} = k)`.
//!
//! All arithmetic is in `f64`. A PMF value below [`PMF_DENOMINATOR_FLOOR`]
//! may not be used as a denominator; operations that would do so return
//! [`Error::DegenerateDistribution`].

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest PMF value accepted as a denominator (normalizers, marginals).
pub const PMF_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Storage floor applied before taking logarithms of PMF values.
pub const PMF_LOG_FLOOR: f64 = 1e-300;

/// Per-element Bernoulli inclusion probabilities, each in `[0, 1]`, n >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    values: Vec<f64>,
}

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyProbVector);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbOutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    /// All entries equal to `value`.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        // Non-emptiness is a construction invariant.
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

/// Probability mass function of a Poisson binomial sum, indexed by count.
///
/// For an n-element parameter vector the PMF has length n+1 (counts 0..=n).
#[derive(Debug, Clone, PartialEq)]
pub struct PmfVector {
    masses: Vec<f64>,
}

impl PmfVector {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.masses
    }

    /// P(S = count), or zero for counts beyond the support.
    pub fn mass(&self, count: usize) -> f64 {
        self.masses.get(count).copied().unwrap_or(0.0)
    }
}

/// PMF of `S = sum_i b_i` through the closed-form DFT expression.
///
/// Builds the spectrum `x[l] = prod_i (theta_i w^l + 1 - theta_i)` with
/// `w = e^{2*pi*sqrt(-1)/(n+1)}`, applies the forward length-(n+1) DFT,
/// takes the real part, divides by n+1, and clamps each mass to `[0, 1]`
/// (roundoff can make the real part slightly negative).
pub fn pmf_dft(theta: &ProbVector) -> PmfVector {
    let n = theta.len();
    let m = n + 1;
    let base = 2.0 * std::f64::consts::PI / m as f64;

    let mut spectrum = Vec::with_capacity(m);
    for l in 0..m {
        let w = Complex64::from_polar(1.0, base * l as f64);
        let mut prod = Complex64::new(1.0, 0.0);
        for &t in theta.as_slice() {
            prod *= w * t + (1.0 - t);
        }
        spectrum.push(prod);
    }

    // Direct O(n^2) forward DFT; the transform length must be exactly n+1,
    // and at the sizes this crate targets the direct form is both fast
    // enough and the easiest to keep bit-deterministic.
    let mut masses = Vec::with_capacity(m);
    for j in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for (l, &x) in spectrum.iter().enumerate() {
            // Reduce l*j mod m before forming the angle so the sin/cos
            // arguments stay small and accurate.
            let angle = -base * ((l * j) % m) as f64;
            acc += x * Complex64::from_polar(1.0, angle);
        }
        masses.push((acc.re / m as f64).clamp(0.0, 1.0));
    }
    PmfVector { masses }
}

/// PMF by the convolution recurrence `T^i[m] = theta_i T^{i-1}[m-1] +
/// (1-theta_i) T^{i-1}[m]`. O(n^2); the independent oracle for [`pmf_dft`].
pub fn pmf_dp(theta: &ProbVector) -> PmfVector {
    let n = theta.len();
    let mut masses = vec![0.0; n + 1];
    masses[0] = 1.0;
    for (i, &t) in theta.as_slice().iter().enumerate() {
        for m in (0..=i + 1).rev() {
            let stay = if m <= i { masses[m] * (1.0 - t) } else { 0.0 };
            let step = if m > 0 { masses[m - 1] * t } else { 0.0 };
            masses[m] = stay + step;
        }
    }
    PmfVector { masses }
}

/// PMF of `sum_{i != j} b_i` (length n, counts 0..n-1), via [`pmf_dp`] on
/// the parameter vector with entry `j` removed.
pub fn pmf_leave_one_out(theta: &ProbVector, j: usize) -> Result<PmfVector> {
    let n = theta.len();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    if n == 1 {
        // Empty sum: point mass at zero.
        return Ok(PmfVector { masses: vec![1.0] });
    }
    let mut reduced = Vec::with_capacity(n - 1);
    for (i, &t) in theta.as_slice().iter().enumerate() {
        if i != j {
            reduced.push(t);
        }
    }
    let reduced = ProbVector::new(reduced).expect("reduced vector stays valid");
    Ok(pmf_dp(&reduced))
}

/// Leave-one-out masses at a fixed count: for every j,
/// `a[j] = P(S_{-j} = k-1)` and `b[j] = P(S_{-j} = k)`, plus `p = P(S = k)`.
#[derive(Debug, Clone)]
pub(crate) struct LeaveOneOutAt {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub p: f64,
}

/// Computes [`LeaveOneOutAt`] in O(n*k) using prefix/suffix convolution
/// tables truncated at count k:
/// `P(S_{-j} = c) = sum_r P(sum_{i<j} = r) * P(sum_{i>j} = c-r)`.
pub(crate) fn leave_one_out_at(theta: &[f64], k: usize) -> LeaveOneOutAt {
    let n = theta.len();
    debug_assert!(k <= n);

    // prefix[i][m] = P(sum of elements 0..i equals m), m <= k
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    prefix.push(vec![1.0]);
    for (i, &t) in theta.iter().enumerate() {
        let prev = &prefix[i];
        let len = (i + 1).min(k) + 1;
        let mut next = vec![0.0; len];
        for (m, slot) in next.iter_mut().enumerate() {
            let stay = prev.get(m).map_or(0.0, |v| v * (1.0 - t));
            let step = if m > 0 {
                prev.get(m - 1).map_or(0.0, |v| v * t)
            } else {
                0.0
            };
            *slot = stay + step;
        }
        prefix.push(next);
    }

    // suffix[i][m] = P(sum of elements i..n equals m), m <= k
    let mut suffix: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    suffix[n] = vec![1.0];
    for i in (0..n).rev() {
        let t = theta[i];
        let prev = &suffix[i + 1];
        let len = (n - i).min(k) + 1;
        let mut next = vec![0.0; len];
        for (m, slot) in next.iter_mut().enumerate() {
            let stay = prev.get(m).map_or(0.0, |v| v * (1.0 - t));
            let step = if m > 0 {
                prev.get(m - 1).map_or(0.0, |v| v * t)
            } else {
                0.0
            };
            *slot = stay + step;
        }
        suffix[i] = next;
    }

    let p = prefix[n].get(k).copied().unwrap_or(0.0);

    let conv_at = |j: usize, c: usize| -> f64 {
        let pre = &prefix[j];
        let suf = &suffix[j + 1];
        let mut acc = 0.0;
        let r_hi = c.min(pre.len() - 1);
        for r in 0..=r_hi {
            let rest = c - r;
            if let Some(&s) = suf.get(rest) {
                acc += pre[r] * s;
            }
        }
        acc
    };

    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for j in 0..n {
        a.push(if k == 0 { 0.0 } else { conv_at(j, k - 1) });
        b.push(conv_at(j, k));
    }
    LeaveOneOutAt { a, b, p }
}

/// Gradient of `log P(S = k)` with respect to theta, by the leave-one-out
/// identity: component j is `(P(S_{-j} = k-1) - P(S_{-j} = k)) / P(S = k)`.
///
/// Requires theta strictly inside (0, 1) and a non-degenerate `P(S = k)`.
pub fn log_pmf_grad(theta: &ProbVector, k: usize) -> Result<Vec<f64>> {
    let n = theta.len();
    if k > n {
        return Err(Error::CountOutOfRange { k, n });
    }
    for (index, &value) in theta.as_slice().iter().enumerate() {
        if value <= 0.0 || value >= 1.0 {
            return Err(Error::BoundaryTheta { index, value });
        }
    }
    let loo = leave_one_out_at(theta.as_slice(), k);
    if loo.p < PMF_DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDistribution { k, prob: loo.p });
    }
    Ok((0..n).map(|j| (loo.a[j] - loo.b[j]) / loo.p).collect())
}
