use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Contiguous `train < val < test` ranges over the time axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    /// Builds ranges from lengths laid end to end.
    pub fn from_counts(train: usize, val: usize, test: usize) -> Self {
        Self { train: 0..train, val: train..train + val, test: train + val..train + val + test }
    }

    /// `train`/`val` fractions rounded down; the test split takes the rest.
    pub fn from_fractions(t: usize, train_frac: f64, val_frac: f64) -> Result<Self> {
        if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must satisfy train > 0, val >= 0, train + val < 1 (got {train_frac}, {val_frac})"
            )));
        }
        let train = (t as f64 * train_frac).floor() as usize;
        let val = (t as f64 * val_frac).floor() as usize;
        Ok(Self::from_counts(train, val, t - train - val))
    }

    pub fn get(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    fn validate(&self, t: usize) -> Result<()> {
        let ordered = self.train.start <= self.train.end
            && self.train.end <= self.val.start
            && self.val.start <= self.val.end
            && self.val.end <= self.test.start
            && self.test.start <= self.test.end
            && self.test.end <= t;
        if ordered {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("split ranges {self:?} are not ordered and within 0..{t}")))
        }
    }
}

/// Split sizes of the public benchmark datasets, keyed by `(T, D)`.
pub fn known_split(t: usize, d: usize) -> Option<SplitRanges> {
    let counts = match (t, d) {
        (13603, 7) => (8033, 2785, 2785),
        (169, 7) => (69, 2, 98),
        (6791, 8) => (4704, 665, 1422),
        (51899, 21) => (36280, 5175, 10444),
        _ => return None,
    };
    Some(SplitRanges::from_counts(counts.0, counts.1, counts.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    /// `T × D`.
    pub values: Matrix,
    pub channel_names: Vec<String>,
    pub granularity: String,
    pub split: SplitRanges,
}

impl TimeSeriesDataset {
    pub fn new(values: Matrix, channel_names: Vec<String>, granularity: impl Into<String>, split: SplitRanges) -> Result<Self> {
        if channel_names.len() != values.cols() {
            return Err(Error::Shape(format!("{} channel names for {} channels", channel_names.len(), values.cols())));
        }
        split.validate(values.rows())?;
        Ok(Self { values, channel_names, granularity: granularity.into(), split })
    }

    /// Uses the known split for `(T, D)` when there is one, otherwise the
    /// given fractions.
    pub fn with_default_split(values: Matrix, channel_names: Vec<String>, train_frac: f64, val_frac: f64) -> Result<Self> {
        let (t, d) = values.shape();
        let split = match known_split(t, d) {
            Some(s) => s,
            None => SplitRanges::from_fractions(t, train_frac, val_frac)?,
        };
        Self::new(values, channel_names, "unknown", split)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.values.cols()
    }

    pub fn split_values(&self, split: Split) -> Matrix {
        let r = self.split.get(split);
        self.values.slice_rows(r.start, r.end)
    }

    /// Same metadata with new values of identical shape.
    pub fn with_values(&self, values: Matrix) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::mismatch("with_values", self.values.shape(), values.shape()));
        }
        Ok(Self { values, ..self.clone() })
    }
}
