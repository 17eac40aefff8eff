//! The conditional k-subset distribution.
//!
//! Conditioning independent Bernoulli variables `b ~ prod_i Bernoulli(theta_i)`
//! on `sum_i b_i = k` yields a distribution over the `C(n, k)` binary masks
//! with exactly `k` ones:
//!
//! `p(z) = prod_i theta_i^{z_i} (1-theta_i)^{1-z_i} / P(S = k)`.
//!
//! [`SubsetDistribution`] caches everything that depends only on `(theta, k)`
//! at construction — the Poisson binomial normalizer, its gradient, and the
//! suffix tables used by the sampler — so repeated scoring and sampling are
//! O(n) per call and safe to share across threads.

use rand::Rng;

use crate::error::{Error, Result};
use crate::poibin::{self, ProbVector, PMF_DENOMINATOR_FLOOR, PMF_LOG_FLOOR};

/// Entries of theta are clamped to `[THETA_CLAMP, 1 - THETA_CLAMP]` on entry
/// so score components (which divide by theta and 1-theta) stay finite.
pub const THETA_CLAMP: f64 = 1e-6;

/// Enumeration guard: `enumerate_support` refuses supports above this size.
pub const MAX_ENUMERATION: u128 = 1_000_000;

/// Binary inclusion mask over n elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    bits: Vec<u8>,
}

impl SubsetMask {
    /// Validates that every entry is 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        for (index, &value) in bits.iter().enumerate() {
            if value > 1 {
                return Err(Error::InvalidMaskEntry { index, value });
            }
        }
        Ok(Self { bits })
    }

    /// Mask of length n with ones at the given indices.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![0u8; n];
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            bits[i] = 1;
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of included elements.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Indices of included elements, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (b == 1).then_some(i))
            .collect()
    }
}

/// Conditional k-subset distribution with eagerly computed caches.
///
/// Immutable after construction; sampling takes an externally supplied
/// random source, so concurrent use only needs per-thread RNGs.
#[derive(Debug, Clone)]
pub struct SubsetDistribution {
    theta: ProbVector,
    k: usize,
    /// P(S = k) from the DFT route; the normalizer for all probabilities.
    norm: f64,
    /// ln(norm), with the storage floor applied before the log.
    log_norm: f64,
    /// loo_km1[i] = P(S_{-i} = k-1), loo_k[i] = P(S_{-i} = k).
    loo_km1: Vec<f64>,
    loo_k: Vec<f64>,
    /// suffix[i][m] = P(sum_{j >= i} b_j = m) for m <= k; drives the sampler.
    suffix: Vec<Vec<f64>>,
}

impl SubsetDistribution {
    /// Builds the distribution, clamping theta into the open interval and
    /// computing the normalizer, its leave-one-out masses, and the sampler
    /// tables. Fails if `P(S = k)` is below the denominator floor.
    pub fn new(theta: ProbVector, k: usize) -> Result<Self> {
        let n = theta.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidSubsetSize { k, n });
        }
        let clamped: Vec<f64> = theta
            .as_slice()
            .iter()
            .map(|t| t.clamp(THETA_CLAMP, 1.0 - THETA_CLAMP))
            .collect();
        let theta = ProbVector::new(clamped)?;

        let norm = poibin::pmf_dft(&theta).mass(k);
        if norm < PMF_DENOMINATOR_FLOOR {
            return Err(Error::DegenerateDistribution { k, prob: norm });
        }
        let log_norm = norm.max(PMF_LOG_FLOOR).ln();
        let loo = poibin::leave_one_out_at(theta.as_slice(), k);
        let suffix = suffix_table(theta.as_slice(), k);
        Ok(Self {
            theta,
            k,
            norm,
            log_norm,
            loo_km1: loo.a,
            loo_k: loo.b,
            suffix,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The (clamped) inclusion parameters.
    pub fn theta(&self) -> &ProbVector {
        &self.theta
    }

    /// ln P(S = k), the cached log-normalizer.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Gradient of ln P(S = k) with respect to theta (cached).
    pub fn log_norm_grad(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| (self.loo_km1[i] - self.loo_k[i]) / self.norm)
            .collect()
    }

    fn check_mask(&self, mask: &SubsetMask) -> Result<()> {
        if mask.len() != self.n() {
            return Err(Error::LengthMismatch {
                got: mask.len(),
                expected: self.n(),
            });
        }
        let ones = mask.ones();
        if ones != self.k {
            return Err(Error::InvalidSupport {
                got: ones,
                expected: self.k,
            });
        }
        Ok(())
    }

    /// Exact log-probability of a mask in the support:
    /// `sum_i log p(b_i = z_i) - log P(S = k)`.
    pub fn log_prob(&self, mask: &SubsetMask) -> Result<f64> {
        self.check_mask(mask)?;
        let mut acc = 0.0;
        for (&z, &t) in mask.bits().iter().zip(self.theta.as_slice()) {
            acc += if z == 1 { t.ln() } else { (1.0 - t).ln() };
        }
        Ok(acc - self.log_norm)
    }

    /// Score function: the gradient of `log p(z)` with respect to theta.
    ///
    /// Component i equals `z_i/theta_i - (1-z_i)/(1-theta_i)` minus the
    /// normalizer gradient. With `a_i = P(S_{-i} = k-1)`, `b_i = P(S_{-i} = k)`
    /// and `P = theta_i a_i + (1-theta_i) b_i` this reduces to the
    /// cancellation-free forms used here:
    /// included `i`: `b_i / (theta_i P)`; excluded `i`: `-a_i / ((1-theta_i) P)`.
    /// Included components are therefore strictly positive and excluded ones
    /// strictly negative.
    pub fn score(&self, mask: &SubsetMask) -> Result<Vec<f64>> {
        self.check_mask(mask)?;
        let theta = self.theta.as_slice();
        let mut out = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let s = if mask.bits()[i] == 1 {
                self.loo_k[i] / (theta[i] * self.norm)
            } else {
                -self.loo_km1[i] / ((1.0 - theta[i]) * self.norm)
            };
            out.push(s);
        }
        Ok(out)
    }

    /// Exact rejection-free draw via the sequential conditional scheme:
    /// visit elements in order, include element i with probability
    /// `theta_i T[i+1][r-1] / T[i][r]` where r is the count still needed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubsetMask {
        let n = self.n();
        let mut bits = vec![0u8; n];
        let mut remaining = self.k;
        for i in 0..n {
            if remaining == 0 {
                break;
            }
            let with = self.theta.as_slice()[i]
                * self.suffix[i + 1]
                    .get(remaining - 1)
                    .copied()
                    .unwrap_or(0.0);
            let total = self.suffix[i][remaining];
            let p_include = with / total;
            if rng.gen::<f64>() < p_include {
                bits[i] = 1;
                remaining -= 1;
            }
        }
        debug_assert_eq!(remaining, 0, "sampler must place exactly k ones");
        SubsetMask { bits }
    }

    /// Marginal inclusion probabilities `P(b_i = 1 | S = k)`; they sum to k.
    pub fn marginals(&self) -> ProbVector {
        let values: Vec<f64> = self
            .theta
            .as_slice()
            .iter()
            .zip(&self.loo_km1)
            .map(|(&t, &a)| (t * a / self.norm).clamp(0.0, 1.0))
            .collect();
        ProbVector::new(values).expect("marginals stay in [0, 1]")
    }

    /// All `C(n, k)` masks with their exact probabilities (direct product
    /// formula over the dynamic-programming normalizer — a route independent
    /// of `log_prob`/`score`). Guarded to supports of at most 10^6 masks.
    pub fn enumerate_support(&self) -> Result<Vec<(SubsetMask, f64)>> {
        let n = self.n();
        let k = self.k;
        let size = binomial(n, k);
        if size > MAX_ENUMERATION {
            return Err(Error::SupportTooLarge { n, k, size });
        }
        let theta = self.theta.as_slice();
        let norm_dp = poibin::pmf_dp(&self.theta).mass(k);
        let mut out = Vec::with_capacity(size as usize);
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let mut bits = vec![0u8; n];
            for &i in &combo {
                bits[i] = 1;
            }
            let mut prob = 1.0;
            for (i, &t) in theta.iter().enumerate() {
                prob *= if bits[i] == 1 { t } else { 1.0 - t };
            }
            out.push((SubsetMask { bits }, prob / norm_dp));
            if !next_combination(&mut combo, n) {
                break;
            }
        }
        Ok(out)
    }
}

/// Suffix DP for the sampler: `T[i][m] = P(sum_{j >= i} b_j = m)`, m <= k.
///
/// The recurrence `T[i][m] = theta_i T[i+1][m-1] + (1-theta_i) T[i+1][m]` is
/// kept verbatim so the sampler's forced-inclusion ratio is exactly 1.
fn suffix_table(theta: &[f64], k: usize) -> Vec<Vec<f64>> {
    let n = theta.len();
    let mut table: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    table[n] = vec![1.0];
    for i in (0..n).rev() {
        let t = theta[i];
        let prev = &table[i + 1];
        let len = (n - i).min(k) + 1;
        let mut next = vec![0.0; len];
        for (m, slot) in next.iter_mut().enumerate() {
            let with = if m > 0 {
                prev.get(m - 1).map_or(0.0, |v| t * v)
            } else {
                0.0
            };
            let without = prev.get(m).map_or(0.0, |v| (1.0 - t) * v);
            *slot = with + without;
        }
        table[i] = next;
    }
    table
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > MAX_ENUMERATION * 2 {
            return acc; // already past any guard we compare against
        }
    }
    acc
}

/// Lexicographic successor of a k-combination of 0..n; false when exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] != i + n - k {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_theta(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> ProbVector {
        ProbVector::new((0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
    }

    #[test]
    fn mask_validation() {
        assert!(matches!(
            SubsetMask::new(vec![0, 2, 1]),
            Err(Error::InvalidMaskEntry { index: 1, value: 2 })
        ));
        let mask = SubsetMask::from_indices(4, &[1, 3]).unwrap();
        assert_eq!(mask.bits(), &[0, 1, 0, 1]);
        assert_eq!(mask.ones(), 2);
        assert_eq!(mask.indices(), vec![1, 3]);
        assert!(SubsetMask::from_indices(2, &[2]).is_err());
    }

    #[test]
    fn construction_contract() {
        let theta = ProbVector::uniform(4, 0.5).unwrap();
        assert!(matches!(
            SubsetDistribution::new(theta.clone(), 0),
            Err(Error::InvalidSubsetSize { k: 0, n: 4 })
        ));
        assert!(matches!(
            SubsetDistribution::new(theta, 4),
            Err(Error::InvalidSubsetSize { k: 4, n: 4 })
        ));
        // Boundary theta is clamped, not rejected.
        let dist = SubsetDistribution::new(ProbVector::new(vec![0.0, 1.0, 0.5]).unwrap(), 1)
            .unwrap();
        assert!(dist.theta().as_slice()[0] >= THETA_CLAMP);
        assert!(dist.theta().as_slice()[1] <= 1.0 - THETA_CLAMP);
    }

    #[test]
    fn log_prob_symmetric_case() {
        // Equal theta, k=1 of 3: uniform over the three singletons.
        let dist = SubsetDistribution::new(ProbVector::uniform(3, 0.5).unwrap(), 1).unwrap();
        let z = SubsetMask::from_indices(3, &[0]).unwrap();
        let lp = dist.log_prob(&z).unwrap();
        assert!((lp - (1.0f64 / 3.0).ln()).abs() < 1e-12, "got {lp}");
    }

    #[test]
    fn log_prob_rejects_wrong_support() {
        let dist = SubsetDistribution::new(ProbVector::uniform(3, 0.5).unwrap(), 1).unwrap();
        let z = SubsetMask::from_indices(3, &[0, 1]).unwrap();
        assert!(matches!(
            dist.log_prob(&z),
            Err(Error::InvalidSupport { got: 2, expected: 1 })
        ));
        let z = SubsetMask::from_indices(4, &[0]).unwrap();
        assert!(matches!(dist.log_prob(&z), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn log_prob_normalizes_over_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let theta = random_theta(&mut rng, 4, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta, 2).unwrap();
        let total: f64 = dist
            .enumerate_support()
            .unwrap()
            .iter()
            .map(|(z, _)| dist.log_prob(z).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");
    }

    #[test]
    fn log_prob_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let theta = random_theta(&mut rng, 8, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta.clone(), 3).unwrap();
        let z = SubsetMask::from_indices(8, &[1, 4, 6]).unwrap();
        let mut direct = 1.0;
        for (i, &t) in theta.as_slice().iter().enumerate() {
            direct *= if z.bits()[i] == 1 { t } else { 1.0 - t };
        }
        direct /= poibin::pmf_dp(&theta).mass(3);
        let lp = dist.log_prob(&z).unwrap();
        assert!(
            (lp.exp() - direct).abs() < 1e-12,
            "exp(log_prob) {} vs direct {direct}",
            lp.exp()
        );
    }

    #[test]
    fn score_sign_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let n = rng.gen_range(2..12);
            let k = rng.gen_range(1..n);
            let theta = random_theta(&mut rng, n, 0.02, 0.98);
            let dist = SubsetDistribution::new(theta, k).unwrap();
            let z = dist.sample(&mut rng);
            let score = dist.score(&z).unwrap();
            for (i, &s) in score.iter().enumerate() {
                if z.bits()[i] == 1 {
                    assert!(s > 0.0, "included coordinate {i} has score {s}");
                } else {
                    assert!(s < 0.0, "excluded coordinate {i} has score {s}");
                }
            }
        }
    }

    #[test]
    fn score_matches_finite_differences_of_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 10;
        let k = 4;
        let theta = random_theta(&mut rng, n, 0.05, 0.95);
        let dist = SubsetDistribution::new(theta.clone(), k).unwrap();
        let z = dist.sample(&mut rng);
        let score = dist.score(&z).unwrap();
        let h = 1e-6;
        for j in 0..n {
            let mut up = theta.as_slice().to_vec();
            let mut down = up.clone();
            up[j] += h;
            down[j] -= h;
            let up = SubsetDistribution::new(ProbVector::new(up).unwrap(), k)
                .unwrap()
                .log_prob(&z)
                .unwrap();
            let down = SubsetDistribution::new(ProbVector::new(down).unwrap(), k)
                .unwrap()
                .log_prob(&z)
                .unwrap();
            let fd = (up - down) / (2.0 * h);
            let rel = (score[j] - fd).abs() / fd.abs().max(1e-12);
            assert!(rel <= 1e-5, "j={j}: analytic {} vs fd {fd}", score[j]);
        }
    }

    #[test]
    fn score_has_zero_mean_under_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let theta = random_theta(&mut rng, 8, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta, 3).unwrap();
        let mut mean = vec![0.0; 8];
        for (z, _) in dist.enumerate_support().unwrap() {
            let p = dist.log_prob(&z).unwrap().exp();
            for (m, s) in mean.iter_mut().zip(dist.score(&z).unwrap()) {
                *m += p * s;
            }
        }
        for m in &mean {
            assert!(m.abs() <= 1e-9, "mean component {m}");
        }
    }

    #[test]
    fn cached_norm_matches_fresh_recomputation_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let theta = random_theta(&mut rng, 12, 0.05, 0.95);
        let dist = SubsetDistribution::new(theta, 5).unwrap();
        let fresh_norm = poibin::pmf_dft(dist.theta()).mass(5);
        assert_eq!(dist.log_norm().to_bits(), fresh_norm.ln().to_bits());
        let fresh_grad = {
            let loo = poibin::log_pmf_grad(dist.theta(), 5).unwrap();
            // log_pmf_grad normalizes by the DP mass; rebuild with the DFT
            // normalizer the cache uses to compare the cached route exactly.
            let p_dp = poibin::pmf_dp(dist.theta()).mass(5);
            loo.iter().map(|g| g * p_dp / fresh_norm).collect::<Vec<_>>()
        };
        for (c, f) in dist.log_norm_grad().iter().zip(&fresh_grad) {
            assert!((c - f).abs() <= 1e-15 * f.abs().max(1.0));
        }
    }

    #[test]
    fn sampler_uniform_theta_is_uniform_over_subsets() {
        // n=6, k=2: 15 subsets; chi-square with 14 dof at alpha = 0.01.
        let dist = SubsetDistribution::new(ProbVector::uniform(6, 0.3).unwrap(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let draws = 100_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let z = dist.sample(&mut rng);
            *counts.entry(z.indices()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 15);
        let expected = draws as f64 / 15.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 0.99 quantile of chi-square with 14 degrees of freedom.
        assert!(chi2 < 29.141, "chi2 {chi2}");
    }

    #[test]
    fn sampler_matches_enumerated_probabilities() {
        let mut theta_rng = ChaCha8Rng::seed_from_u64(61);
        let theta = random_theta(&mut theta_rng, 8, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta, 3).unwrap();
        let support = dist.enumerate_support().unwrap();
        let draws = 200_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let mut counts: std::collections::HashMap<Vec<usize>, usize> = Default::default();
        for _ in 0..draws {
            *counts.entry(dist.sample(&mut rng).indices()).or_insert(0) += 1;
        }
        for (z, p) in &support {
            let freq = *counts.get(&z.indices()).unwrap_or(&0) as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "subset {:?}: freq {freq}, prob {p}, se {se}",
                z.indices()
            );
        }
    }

    #[test]
    fn sampler_respects_near_forced_exclusion() {
        // k = n-1 with one element far likelier than the rest: the heavy
        // element's exclusion probability must match enumeration.
        let theta = ProbVector::new(vec![0.9, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        let dist = SubsetDistribution::new(theta, 5).unwrap();
        let support = dist.enumerate_support().unwrap();
        let p_excluded: f64 = support
            .iter()
            .filter(|(z, _)| z.bits()[0] == 0)
            .map(|(_, p)| p)
            .sum();
        // Analytic marginal must agree with enumeration almost exactly.
        let marginal = dist.marginals().as_slice()[0];
        assert!((1.0 - marginal - p_excluded).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let draws = 200_000usize;
        let excluded = (0..draws)
            .filter(|_| dist.sample(&mut rng).bits()[0] == 0)
            .count() as f64
            / draws as f64;
        let se = (p_excluded * (1.0 - p_excluded) / draws as f64).sqrt();
        assert!(
            (excluded - p_excluded).abs() <= 3.0 * se,
            "empirical {excluded} vs exact {p_excluded}"
        );
    }

    #[test]
    fn marginals_uniform_theta() {
        let dist = SubsetDistribution::new(ProbVector::uniform(10, 0.4).unwrap(), 3).unwrap();
        for &m in dist.marginals().as_slice() {
            assert!((m - 0.3).abs() < 1e-12, "marginal {m}");
        }
    }

    #[test]
    fn marginals_sum_to_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let theta = random_theta(&mut rng, 32, 0.05, 0.95);
        let dist = SubsetDistribution::new(theta, 7).unwrap();
        let total: f64 = dist.marginals().as_slice().iter().sum();
        assert!((total - 7.0).abs() <= 1e-9, "sum {total}");
    }

    #[test]
    fn marginals_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let theta = random_theta(&mut rng, 8, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta, 3).unwrap();
        let mut weighted = vec![0.0; 8];
        for (z, p) in dist.enumerate_support().unwrap() {
            for (w, &bit) in weighted.iter_mut().zip(z.bits()) {
                if bit == 1 {
                    *w += p;
                }
            }
        }
        for (a, b) in dist.marginals().as_slice().iter().zip(&weighted) {
            assert!((a - b).abs() <= 1e-10, "analytic {a} vs enumerated {b}");
        }
    }

    #[test]
    fn enumeration_basics() {
        let dist = SubsetDistribution::new(ProbVector::uniform(3, 0.5).unwrap(), 1).unwrap();
        assert_eq!(dist.enumerate_support().unwrap().len(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let theta = random_theta(&mut rng, 5, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta, 2).unwrap();
        let support = dist.enumerate_support().unwrap();
        assert_eq!(support.len(), 10);
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn enumeration_argmax_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let theta = random_theta(&mut rng, 12, 0.1, 0.9);
        let dist = SubsetDistribution::new(theta.clone(), 4).unwrap();
        let support = dist.enumerate_support().unwrap();
        assert_eq!(support.len(), 495);
        let best = support
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
            .clone();
        // The most probable mask includes the k largest odds theta/(1-theta).
        let mut order: Vec<usize> = (0..12).collect();
        order.sort_by(|&a, &b| {
            let odds = |i: usize| {
                let t = theta.as_slice()[i];
                t / (1.0 - t)
            };
            odds(b).total_cmp(&odds(a))
        });
        let expected = SubsetMask::from_indices(12, &order[..4]).unwrap();
        assert_eq!(best, expected);
    }

    #[test]
    fn enumeration_guard_trips() {
        let theta = ProbVector::uniform(64, 0.5).unwrap();
        let dist = SubsetDistribution::new(theta, 16).unwrap();
        assert!(matches!(
            dist.enumerate_support(),
            Err(Error::SupportTooLarge { .. })
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn sampler_always_returns_k_ones(
                values in proptest::collection::vec(0.001f64..0.999, 2..24),
                k_raw in 1usize..24,
                seed in 0u64..1000,
            ) {
                let n = values.len();
                let k = 1 + k_raw % (n - 1).max(1);
                prop_assume!(k < n);
                let dist = SubsetDistribution::new(ProbVector::new(values).unwrap(), k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z = dist.sample(&mut rng);
                prop_assert_eq!(z.ones(), k);
            }

            #[test]
            fn normalization_on_small_supports(
                values in proptest::collection::vec(0.05f64..0.95, 3..10),
                k_raw in 1usize..10,
            ) {
                let n = values.len();
                let k = 1 + k_raw % (n - 1).max(1);
                prop_assume!(k < n);
                let dist = SubsetDistribution::new(ProbVector::new(values).unwrap(), k).unwrap();
                let total: f64 = dist
                    .enumerate_support()
                    .unwrap()
                    .iter()
                    .map(|(z, _)| dist.log_prob(z).unwrap().exp())
                    .sum();
                prop_assert!((total - 1.0).abs() <= 1e-10);
            }
        }
    }
}
