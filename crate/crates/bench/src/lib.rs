//! Fixtures shared by the benchmarks.

use rand::{Rng as _, SeedableRng};
use stackdx::rng::Rng;
use stackdx::LabeledDataset;

/// Balanced sparse dataset where the first five columns carry signal.
pub fn sparse_dataset(n: usize, p: usize, density: f64, seed: u64) -> LabeledDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
    let rows = labels
        .iter()
        .map(|&y| {
            (0..p as u32)
                .filter(|&j| {
                    let boost = if y == 1 && j < 5 { 4.0 } else { 1.0 };
                    rng.random_bool((density * boost).min(1.0))
                })
                .collect()
        })
        .collect();
    LabeledDataset::from_rows(p, rows, labels).expect("valid fixture")
}

/// Scores correlated with the labels, with ties.
pub fn scored_labels(n: usize, seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
    let scores = labels
        .iter()
        .map(|&y| (f64::from(y) * 0.3 + rng.random::<f64>() * 0.7 * 100.0).round() / 100.0)
        .collect();
    (labels, scores)
}
