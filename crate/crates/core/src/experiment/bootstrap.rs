use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("cannot bootstrap an empty sample")]
    Empty,
    #[error("confidence must lie in (0, 1), got {0}")]
    Confidence(String),
    #[error("at least one resample is required")]
    NoResamples,
}

/// Sample median with a percentile-bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub resamples: usize,
}

/// Median of sorted data; mean of the two middle values for even lengths.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn bootstrap_median(samples: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<MedianEstimate, BootstrapError> {
    if samples.is_empty() {
        return Err(BootstrapError::Empty);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(BootstrapError::Confidence(confidence.to_string()));
    }
    if resamples == 0 {
        return Err(BootstrapError::NoResamples);
    }
    // sorted first so the input order cannot influence which values are drawn
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = median_sorted(&sorted);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0.0; n];
    let mut medians = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in draw.iter_mut() {
            *slot = sorted[rng.gen_range(0..n)];
        }
        draw.sort_by(f64::total_cmp);
        medians.push(median_sorted(&draw));
    }
    medians.sort_by(f64::total_cmp);

    let alpha = 1.0 - confidence;
    let lo_idx = ((alpha / 2.0) * resamples as f64).floor() as usize;
    let hi_idx = (((1.0 - alpha / 2.0) * resamples as f64).ceil() as usize).saturating_sub(1);
    let ci_low = medians[lo_idx.min(resamples - 1)].min(median);
    let ci_high = medians[hi_idx.min(resamples - 1)].max(median);
    Ok(MedianEstimate { median, ci_low, ci_high, n, resamples })
}
