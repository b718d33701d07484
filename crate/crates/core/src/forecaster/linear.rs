use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{digest_matrices, FrozenForecaster};
use crate::error::{Error, Result};
use crate::numkit::{glorot_uniform, Matrix, Rng};
use crate::optim::{NodeId, Tape};

/// `f(x) = W_FMᵀ x + b_FM`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFm {
    w_fm: Matrix,
    b_fm: Vec<f64>,
    w_t: Matrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearFmFile {
    /// `L` rows of `H` entries.
    w_fm: Vec<Vec<f64>>,
    b_fm: Vec<f64>,
}

impl LinearFm {
    pub fn new(w_fm: Matrix, b_fm: Vec<f64>) -> Result<Self> {
        if w_fm.cols() != b_fm.len() || w_fm.rows() == 0 || w_fm.cols() == 0 {
            return Err(Error::mismatch("LinearFm::new", w_fm.shape(), (b_fm.len(), 1)));
        }
        if !w_fm.is_finite() || b_fm.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("forecaster weights must be finite".into()));
        }
        let w_t = w_fm.transpose();
        Ok(Self { w_fm, b_fm, w_t })
    }

    /// Reads `{"w_fm": [[..H..] × L], "b_fm": [..H..]}`.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: LinearFmFile = serde_json::from_str(text)?;
        let h = file.b_fm.len();
        if let Some(bad) = file.w_fm.iter().position(|r| r.len() != h) {
            return Err(Error::Shape(format!("w_fm row {bad} has {} entries, expected {h}", file.w_fm[bad].len())));
        }
        Self::new(Matrix::from_rows(&file.w_fm), file.b_fm)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = LinearFmFile {
            w_fm: (0..self.w_fm.rows()).map(|i| self.w_fm.row(i).to_vec()).collect(),
            b_fm: self.b_fm.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// `L × H`.
    pub fn w_fm(&self) -> &Matrix {
        &self.w_fm
    }

    pub fn b_fm(&self) -> &[f64] {
        &self.b_fm
    }
}

/// `W_FMᵀ · x + b_FM · 1ᵀ` for an `L × D′` input.
pub fn linear_fm_forecast(fm: &LinearFm, x: &Matrix) -> Result<Matrix> {
    if x.rows() != fm.w_fm.rows() {
        return Err(Error::mismatch("linear_fm_forecast", fm.w_t.shape(), x.shape()));
    }
    fm.w_t.matmul(x)?.add_col_broadcast(&fm.b_fm)
}

/// `W_FM` Glorot-uniform with fan `(L, H)`; `b_FM` Glorot-uniform with fan
/// `(H, 1)`.
pub fn random_linear_fm(rng: &mut Rng, context_len: usize, horizon: usize) -> Result<LinearFm> {
    if context_len == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("context length and horizon must be >= 1".into()));
    }
    let w = glorot_uniform(rng, context_len, horizon);
    let b = glorot_uniform(rng, horizon, 1).into_vec();
    LinearFm::new(w, b)
}

impl FrozenForecaster for LinearFm {
    fn name(&self) -> &str {
        "linear"
    }

    fn context_len(&self) -> usize {
        self.w_fm.rows()
    }

    fn horizon(&self) -> usize {
        self.w_fm.cols()
    }

    fn forecast_one(&self, context: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::column_vector(context);
        Ok(linear_fm_forecast(self, &x)?.into_vec())
    }

    fn tape_forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let y = tape.block_left_mul(x, self.w_t.clone())?;
        tape.block_row_bias(y, self.b_fm.clone())
    }

    fn as_linear(&self) -> Option<&LinearFm> {
        Some(self)
    }

    fn checksum(&self) -> String {
        digest_matrices(&[&self.w_fm, &Matrix::column_vector(&self.b_fm)])
    }
}
