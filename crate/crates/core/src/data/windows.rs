use std::ops::Range;

use super::dataset::{Split, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Paired context and target windows cut from one split.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    /// `L × D` each.
    pub contexts: Vec<Matrix>,
    /// `H × D` each, starting right after the matching context.
    pub targets: Vec<Matrix>,
    /// Absolute index of each context's first step in the source series.
    pub starts: Vec<usize>,
}

impl WindowBatch {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn context_len(&self) -> usize {
        self.contexts.first().map_or(0, Matrix::rows)
    }

    pub fn horizon(&self) -> usize {
        self.targets.first().map_or(0, Matrix::rows)
    }

    pub fn n_channels(&self) -> usize {
        self.contexts.first().map_or(0, Matrix::cols)
    }

    /// The windows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> WindowBatch {
        WindowBatch {
            contexts: indices.iter().map(|&i| self.contexts[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            starts: indices.iter().map(|&i| self.starts[i]).collect(),
        }
    }

    /// Contexts stacked vertically: `(B·L) × D`.
    pub fn stacked_contexts(&self) -> Result<Matrix> {
        Matrix::vstack(&self.contexts)
    }

    /// Targets stacked vertically: `(B·H) × D`.
    pub fn stacked_targets(&self) -> Result<Matrix> {
        Matrix::vstack(&self.targets)
    }

    pub fn concat(batches: &[WindowBatch]) -> WindowBatch {
        let mut out = WindowBatch { contexts: Vec::new(), targets: Vec::new(), starts: Vec::new() };
        for b in batches {
            out.contexts.extend(b.contexts.iter().cloned());
            out.targets.extend(b.targets.iter().cloned());
            out.starts.extend(b.starts.iter().copied());
        }
        out
    }
}

/// `floor((n − L − H) / stride) + 1`, or 0 when `n < L + H`.
pub fn window_count(n: usize, l: usize, h: usize, stride: usize) -> usize {
    if n < l + h || stride == 0 {
        0
    } else {
        (n - l - h) / stride + 1
    }
}

/// Cuts `(context, target)` pairs from `split` with the given stride.
pub fn make_windows(ds: &TimeSeriesDataset, split: Split, l: usize, h: usize, stride: usize) -> Result<WindowBatch> {
    windows_in_range(ds, ds.split.get(split), l, h, stride).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{} split: {msg}", split.as_str())),
        other => other,
    })
}

pub(crate) fn windows_in_range(ds: &TimeSeriesDataset, range: Range<usize>, l: usize, h: usize, stride: usize) -> Result<WindowBatch> {
    if l == 0 || h == 0 || stride == 0 {
        return Err(Error::InvalidArgument("L, H and stride must be >= 1".into()));
    }
    let n = range.len();
    if n < l + h {
        return Err(Error::InvalidArgument(format!("{n} steps is too short, need at least L + H = {}", l + h)));
    }
    let count = window_count(n, l, h, stride);
    let mut batch = WindowBatch {
        contexts: Vec::with_capacity(count),
        targets: Vec::with_capacity(count),
        starts: Vec::with_capacity(count),
    };
    for w in 0..count {
        let s = range.start + w * stride;
        batch.contexts.push(ds.values.slice_rows(s, s + l));
        batch.targets.push(ds.values.slice_rows(s + l, s + l + h));
        batch.starts.push(s);
    }
    Ok(batch)
}

/// `k` contiguous, equal-length folds of the train split (the last fold
/// absorbs the remainder). Each fold yields `(train_windows, val_windows)`
/// where validation is the fold and training is everything before it plus
/// everything after it, cut separately so no window straddles the fold.
pub fn temporal_folds(
    ds: &TimeSeriesDataset,
    k: usize,
    l: usize,
    h: usize,
    stride: usize,
) -> Result<Vec<(WindowBatch, WindowBatch)>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let train = ds.split.train.clone();
    let fold_len = train.len() / k;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let start = train.start + f * fold_len;
        let end = if f + 1 == k { train.end } else { start + fold_len };
        let val = windows_in_range(ds, start..end, l, h, stride)?;
        let mut parts = Vec::new();
        for r in [train.start..start, end..train.end] {
            if r.len() >= l + h {
                parts.push(windows_in_range(ds, r, l, h, stride)?);
            }
        }
        let tr = WindowBatch::concat(&parts);
        if tr.is_empty() {
            return Err(Error::InvalidArgument(format!("fold {f} leaves no training windows")));
        }
        folds.push((tr, val));
    }
    Ok(folds)
}
