//! Reversible instance normalization without learnable affine terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub const REVIN_EPS: f64 = 1e-5;

/// Per-channel statistics of one context window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevinState {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `eps`.
    pub std: Vec<f64>,
    pub eps: f64,
}

pub fn revin_normalize(x: &Matrix, eps: f64) -> Result<(Matrix, RevinState)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("revin eps must be > 0, got {eps}")));
    }
    let n = x.rows();
    if n == 0 {
        return Err(Error::Shape("revin needs a non-empty context".into()));
    }
    let mean = x.column_means();
    let mut var = vec![0.0; x.cols()];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            var[j] += (v - mean[j]).powi(2);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt().max(eps)).collect();
    let out = Matrix::from_fn(n, x.cols(), |i, j| (x[(i, j)] - mean[j]) / std[j]);
    Ok((out, RevinState { mean, std, eps }))
}

/// `y · std + mean` per channel.
pub fn revin_denormalize(y: &Matrix, state: &RevinState) -> Result<Matrix> {
    if y.cols() != state.mean.len() {
        return Err(Error::mismatch("revin_denormalize", y.shape(), (1, state.mean.len())));
    }
    Ok(Matrix::from_fn(y.rows(), y.cols(), |i, j| y[(i, j)] * state.std[j] + state.mean[j]))
}
