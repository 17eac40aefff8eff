//! Evaluation metrics.

use crate::error::{Error, Result};

/// Peak signal-to-noise ratio in dB for [0, 1]-valued signals:
/// `10 log10(1 / MSE)`. A zero MSE reports `f64::INFINITY` (serialized as
/// `inf` in CSV output).
pub fn metric_psnr(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: prediction.len(),
        });
    }
    let mse = prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / prediction.len() as f64;
    Ok(psnr_from_mse(mse))
}

/// PSNR for a peak value of 1.0 given a precomputed mean squared error.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Fraction of correct predictions.
pub fn metric_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}
