use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

const RANGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    None,
    Standard,
    Minmax,
}

/// Per-channel affine map `(x − offset) / scale`, fit once on train data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    offset: Vec<f64>,
    scale: Vec<f64>,
}

pub fn fit_scaler(kind: ScalerKind, train: &Matrix) -> Result<Scaler> {
    let (n, d) = train.shape();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot fit a scaler on an empty split".into()));
    }
    let (offset, scale) = match kind {
        ScalerKind::None => (vec![0.0; d], vec![1.0; d]),
        ScalerKind::Standard => {
            let mean = train.column_means();
            let mut var = vec![0.0; d];
            for i in 0..n {
                for (j, v) in train.row(i).iter().enumerate() {
                    var[j] += (v - mean[j]).powi(2);
                }
            }
            let std = var
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let s = (v / n as f64).sqrt();
                    if s < RANGE_EPS {
                        log::warn!("channel {j} is constant on the train split; using unit scale");
                        1.0
                    } else {
                        s
                    }
                })
                .collect();
            (mean, std)
        }
        ScalerKind::Minmax => {
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for i in 0..n {
                for (j, v) in train.row(i).iter().enumerate() {
                    lo[j] = lo[j].min(*v);
                    hi[j] = hi[j].max(*v);
                }
            }
            let range = lo
                .iter()
                .zip(&hi)
                .enumerate()
                .map(|(j, (l, h))| {
                    let r = h - l;
                    if r < RANGE_EPS {
                        log::warn!("channel {j} has zero range on the train split; using unit scale");
                        1.0
                    } else {
                        r
                    }
                })
                .collect();
            (lo, range)
        }
    };
    Ok(Scaler { kind, offset, scale })
}

impl Scaler {
    pub fn n_channels(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| (x[(i, j)] - self.offset[j]) / self.scale[j]))
    }

    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * self.scale[j] + self.offset[j]))
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_channels() {
            return Err(Error::mismatch("scaler", x.shape(), (1, self.n_channels())));
        }
        Ok(())
    }
}
