//! Order-insensitive reductions for Monte Carlo output.

use alloc::string::String;

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean and standard error of a Monte Carlo sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub strategy: String,
    pub adversary: String,
}

impl ValueEstimate {
    /// Panics if `samples.len() < 2`.
    pub fn from_samples(samples: &[f64], seed: u64, strategy: String, adversary: String) -> Self {
        let (mean, std_error) = mean_and_se(samples);
        Self {
            mean,
            std_error,
            n_paths: samples.len(),
            seed,
            strategy,
            adversary,
        }
    }
}

/// `(mean, sample std / √n)` with two-pass pairwise sums.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    assert!(samples.len() >= 2, "need at least two samples");
    let first = samples[0];
    if samples.iter().all(|s| *s == first) {
        return (first, 0.0);
    }
    let n = samples.len() as f64;
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(*s), hi.max(*s))
    });
    let mean = (pairwise_sum(samples) / n).clamp(lo, hi);
    let mut sq: alloc::vec::Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    sq.clear();
    (mean, libm::sqrt(var / n))
}
