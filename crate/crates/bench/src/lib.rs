//! Benchmark inputs shared by the criterion targets.

use eegpath::numcore::Tensor;

/// Deterministic values in [-1, 1).
pub fn pattern(shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |i| ((i * 7919) % 1000) as f64 / 500.0 - 1.0)
}

pub fn signal(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 * 0.37).sin() + 0.2 * (i as f64 * 2.1).cos()).collect()
}
