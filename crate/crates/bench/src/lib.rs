//! Shared fixtures for the criterion benchmarks.

use adapts_core::data::{generate_synthetic_with, make_windows, Split, SplitRanges, SyntheticConfig, SyntheticMode, WindowBatch};
use adapts_core::{Matrix, Rng};

/// Random `rows × cols` matrix of rank `rank`.
pub fn low_rank(seed: u64, rows: usize, cols: usize, rank: usize) -> Matrix {
    let mut rng = Rng::new(seed);
    rng.normal_matrix(rows, rank).matmul(&rng.normal_matrix(rank, cols)).expect("conformable")
}

/// Stride-8 windows over a full correlated synthetic series.
pub fn correlated_windows(seed: u64, l: usize, h: usize) -> WindowBatch {
    let mut rng = Rng::new(seed);
    let mut ds = generate_synthetic_with(&mut rng, SyntheticMode::Correlated, 2048, &SyntheticConfig::linear_experiment())
        .expect("valid synthetic config");
    ds.split = SplitRanges::from_counts(ds.len(), 0, 0);
    make_windows(&ds, Split::Train, l, h, 8).expect("series is long enough")
}
