//! Relaxed subset sampling baselines.
//!
//! Gumbel top-k relaxation: perturb logits with Gumbel noise, then apply k
//! tempered softmax rounds; after each round the selected position's key is
//! hard-suppressed so the next round distributes its unit of mass over the
//! remaining elements. The relaxed sample is the sum of the k soft one-hots
//! (so its entries sum to k). The straight-through variant hardens the
//! relaxed weights to a top-k mask on the forward pass while gradients keep
//! flowing through the relaxed rounds.

use rand::Rng;

use crate::error::{Error, Result};
use crate::subset::SubsetMask;

/// Additive key suppression applied after each softmax round.
const SUPPRESS: f64 = -1e9;

/// A relaxed subset sample: nonnegative weights summing to k.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSubset {
    pub weights: Vec<f64>,
    pub temperature: f64,
}

/// Per-round softmax outputs, retained for the backward pass.
#[derive(Debug, Clone)]
pub struct RelaxedTrace {
    rounds: Vec<Vec<f64>>,
    temperature: f64,
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    let u = u.max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

fn tempered_softmax(keys: &[f64], tau: f64) -> Vec<f64> {
    let max = keys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = keys.iter().map(|k| ((k - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Relaxed top-k sample over Gumbel-perturbed logits.
pub fn gumbel_topk_relaxed<R: Rng + ?Sized>(
    logits: &[f64],
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<RelaxedSubset> {
    gumbel_topk_relaxed_traced(logits, k, tau, rng).map(|(relaxed, _)| relaxed)
}

/// As [`gumbel_topk_relaxed`], additionally returning the per-round softmax
/// trace needed to push gradients back to the logits.
pub fn gumbel_topk_relaxed_traced<R: Rng + ?Sized>(
    logits: &[f64],
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<(RelaxedSubset, RelaxedTrace)> {
    let n = logits.len();
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTemperature(tau));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidSubsetSize { k, n });
    }
    let mut keys: Vec<f64> = logits.iter().map(|l| l + gumbel(rng)).collect();
    let mut weights = vec![0.0; n];
    let mut rounds = Vec::with_capacity(k);
    for _ in 0..k {
        let soft = tempered_softmax(&keys, tau);
        for (w, s) in weights.iter_mut().zip(&soft) {
            *w += s;
        }
        let selected = argmax(&keys);
        keys[selected] += SUPPRESS;
        rounds.push(soft);
    }
    Ok((
        RelaxedSubset {
            weights,
            temperature: tau,
        },
        RelaxedTrace {
            rounds,
            temperature: tau,
        },
    ))
}

/// Pulls a gradient with respect to the relaxed weights back to the logits
/// through the k softmax rounds (the hard suppression choices are treated as
/// constants, as in straight-through practice).
pub fn relaxed_logit_grad(trace: &RelaxedTrace, weight_grad: &[f64]) -> Vec<f64> {
    let n = weight_grad.len();
    let mut out = vec![0.0; n];
    for soft in &trace.rounds {
        let dot: f64 = soft.iter().zip(weight_grad).map(|(s, g)| s * g).sum();
        for i in 0..n {
            out[i] += soft[i] * (weight_grad[i] - dot) / trace.temperature;
        }
    }
    out
}

/// Hard top-k of a weight vector; ties broken by lowest index.
pub fn hard_topk(weights: &[f64], k: usize) -> SubsetMask {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut bits = vec![0u8; weights.len()];
    for &i in order.iter().take(k) {
        bits[i] = 1;
    }
    SubsetMask::new(bits).expect("bits are 0/1")
}

/// Straight-through hardening: forward value is the hard top-k of the
/// relaxed weights; the backward contract treats the hard mask's sensitivity
/// to the logits as the relaxed sample's sensitivity (callers feed the loss
/// gradient at the hard mask into [`relaxed_logit_grad`]).
pub fn straight_through(relaxed: &RelaxedSubset) -> SubsetMask {
    let k = relaxed.weights.iter().sum::<f64>().round() as usize;
    hard_topk(&relaxed.weights, k)
}

/// Exponential interpolation from `start` to `end` over `total_steps`.
pub fn exp_schedule(start: f64, end: f64, step: usize, total_steps: usize) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::ZeroTotalSteps);
    }
    if step > total_steps {
        return Err(Error::StepBeyondTotal {
            step,
            total: total_steps,
        });
    }
    if !(start > 0.0) || !(end > 0.0) {
        return Err(Error::NonPositiveTemperature(start.min(end)));
    }
    // Exact endpoints regardless of powf rounding.
    if step == 0 {
        return Ok(start);
    }
    if step == total_steps {
        return Ok(end);
    }
    Ok(start * (end / start).powf(step as f64 / total_steps as f64))
}

/// The annealing schedule used for the tempered baselines: exponential decay
/// from 1 to 0.01 across training.
pub fn temperature_schedule(step: usize, total_steps: usize) -> Result<f64> {
    exp_schedule(1.0, 0.01, step, total_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contract_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            gumbel_topk_relaxed(&[0.0, 1.0], 1, 0.0, &mut rng),
            Err(Error::NonPositiveTemperature(_))
        ));
        assert!(matches!(
            gumbel_topk_relaxed(&[0.0, 1.0], 2, 1.0, &mut rng),
            Err(Error::InvalidSubsetSize { k: 2, n: 2 })
        ));
        assert!(matches!(
            temperature_schedule(1, 0),
            Err(Error::ZeroTotalSteps)
        ));
        assert!(matches!(
            temperature_schedule(11, 10),
            Err(Error::StepBeyondTotal { step: 11, total: 10 })
        ));
    }

    #[test]
    fn weights_are_nonnegative_and_sum_to_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let n = rng.gen_range(3..20);
            let k = rng.gen_range(1..n);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let tau = rng.gen_range(0.05..4.0);
            let relaxed = gumbel_topk_relaxed(&logits, k, tau, &mut rng).unwrap();
            let total: f64 = relaxed.weights.iter().sum();
            assert!((total - k as f64).abs() <= 1e-6, "sum {total} for k={k}");
            for &w in &relaxed.weights {
                // Near a key tie a coordinate can collect mass in several
                // rounds before its own suppression, so the per-coordinate
                // bound above 1 is only reached in the cooled regime (see
                // the cooling tests); k is the hard cap.
                assert!(w >= 0.0 && w <= k as f64 + 1e-9, "weight {w}");
            }
        }
    }

    #[test]
    fn cooled_weights_live_in_the_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(3..16);
            let k = rng.gen_range(1..n);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let relaxed = gumbel_topk_relaxed(&logits, k, 1e-4, &mut rng).unwrap();
            for &w in &relaxed.weights {
                assert!((-1e-9..=1.0 + 1e-3).contains(&w), "weight {w}");
            }
        }
    }

    #[test]
    fn low_temperature_approaches_hard_topk_of_perturbed_logits() {
        // Replay the same noise by reusing the seed, then compare against the
        // hard top-k of the perturbed keys.
        let logits = vec![0.3, -1.2, 2.0, 0.7, -0.4];
        let k = 2;
        let relaxed =
            gumbel_topk_relaxed(&logits, k, 1e-4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(3);
        let keys: Vec<f64> = logits.iter().map(|l| l + gumbel(&mut replay)).collect();
        let hard = hard_topk(&keys, k);
        for (w, &b) in relaxed.weights.iter().zip(hard.bits()) {
            assert!((w - b as f64).abs() < 1e-3, "weight {w} vs hard {b}");
        }
    }

    #[test]
    fn fixed_seed_reproduces_bitwise() {
        let logits = vec![0.1, 0.5, -0.3, 1.2, 0.0];
        let a = gumbel_topk_relaxed(&logits, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = gumbel_topk_relaxed(&logits, 2, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn straight_through_hard_cases() {
        let relaxed = RelaxedSubset {
            weights: vec![0.9, 0.8, 0.2, 0.1],
            temperature: 1.0,
        };
        assert_eq!(straight_through(&relaxed).bits(), &[1, 1, 0, 0]);

        // Ties broken by lowest index.
        let tied = RelaxedSubset {
            weights: vec![0.5, 0.5, 0.5],
            temperature: 1.0,
        };
        // Weights sum to 1.5 here; hardening rounds the implied k to 2 — use
        // hard_topk directly to pin the documented k=1 tie-break case.
        assert_eq!(hard_topk(&tied.weights, 1).bits(), &[1, 0, 0]);
    }

    #[test]
    fn straight_through_masks_have_exactly_k_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let n = rng.gen_range(3..16);
            let k = rng.gen_range(1..n);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let relaxed = gumbel_topk_relaxed(&logits, k, 0.7, &mut rng).unwrap();
            assert_eq!(straight_through(&relaxed).ones(), k);
        }
    }

    #[test]
    fn cooling_converges_monotonically_to_the_hard_mask() {
        // Monotone convergence holds once tau is below the key-separation
        // scale; above it, a coordinate involved in a near tie can briefly
        // move away from its hard value while cooling. The ladder therefore
        // starts in the separated regime.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let n = rng.gen_range(4..12);
            let k = rng.gen_range(1..n);
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let noise_seed: u64 = rng.gen();
            let sample_at = |tau: f64| {
                gumbel_topk_relaxed(&logits, k, tau, &mut ChaCha8Rng::seed_from_u64(noise_seed))
                    .unwrap()
            };
            let hard = straight_through(&sample_at(1e-6));
            let taus = [0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4];
            let mut last = f64::INFINITY;
            for tau in taus {
                let relaxed = sample_at(tau);
                let dev = relaxed
                    .weights
                    .iter()
                    .zip(hard.bits())
                    .map(|(w, &b)| (w - b as f64).abs())
                    .fold(0.0, f64::max);
                assert!(
                    dev <= last + 1e-9,
                    "deviation rose from {last} to {dev} at tau {tau}"
                );
                last = dev;
            }
        }
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        assert_eq!(temperature_schedule(0, 100).unwrap(), 1.0);
        assert_eq!(temperature_schedule(100, 100).unwrap(), 0.01);
        let mid = temperature_schedule(50, 100).unwrap();
        assert!((mid - 0.1).abs() < 1e-12, "midpoint {mid}");
    }

    #[test]
    fn relaxed_backward_matches_finite_differences() {
        // d(sum_r softmax_r)/dlogits against central differences on a fixed
        // noise draw (noise replayed via the seed).
        let logits = vec![0.4, -0.6, 1.1, 0.2];
        let k = 2;
        let tau = 0.8;
        let seed = 7u64;
        let upstream = vec![0.3, -1.0, 0.7, 0.5];

        let (_, trace) =
            gumbel_topk_relaxed_traced(&logits, k, tau, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap();
        let analytic = relaxed_logit_grad(&trace, &upstream);

        let objective = |l: &[f64]| -> f64 {
            let relaxed =
                gumbel_topk_relaxed(l, k, tau, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            relaxed
                .weights
                .iter()
                .zip(&upstream)
                .map(|(w, u)| w * u)
                .sum()
        };
        let h = 1e-6;
        for j in 0..logits.len() {
            let mut up = logits.clone();
            let mut down = logits.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (objective(&up) - objective(&down)) / (2.0 * h);
            assert!(
                (analytic[j] - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "j={j}: analytic {} vs fd {fd}",
                analytic[j]
            );
        }
    }
}
