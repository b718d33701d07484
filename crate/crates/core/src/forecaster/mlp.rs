use super::{digest_matrices, FrozenForecaster};
use crate::error::{Error, Result};
use crate::numkit::{glorot_uniform, Matrix, Rng};
use crate::optim::{NodeId, Tape};

pub const DEFAULT_MLP_HIDDEN: usize = 64;

/// `f(x) = W₂ᵀ relu(W₁ᵀ x + b₁) + b₂`, frozen at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpFm {
    w1_t: Matrix,
    b1: Vec<f64>,
    w2_t: Matrix,
    b2: Vec<f64>,
}

impl MlpFm {
    /// `w1` is `L × hidden`, `w2` is `hidden × H`.
    pub fn new(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        if w1.cols() != b1.len() || w2.rows() != w1.cols() || w2.cols() != b2.len() {
            return Err(Error::mismatch("MlpFm::new", w1.shape(), w2.shape()));
        }
        Ok(Self { w1_t: w1.transpose(), b1, w2_t: w2.transpose(), b2 })
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }
}

/// Glorot-uniform weights; biases Glorot-uniform with fan `(n, 1)`.
pub fn random_mlp_fm(rng: &mut Rng, context_len: usize, horizon: usize, hidden: usize) -> Result<MlpFm> {
    if context_len == 0 || horizon == 0 || hidden == 0 {
        return Err(Error::InvalidArgument("context length, horizon and hidden width must be >= 1".into()));
    }
    let w1 = glorot_uniform(rng, context_len, hidden);
    let b1 = glorot_uniform(rng, hidden, 1).into_vec();
    let w2 = glorot_uniform(rng, hidden, horizon);
    let b2 = glorot_uniform(rng, horizon, 1).into_vec();
    MlpFm::new(w1, b1, w2, b2)
}

impl FrozenForecaster for MlpFm {
    fn name(&self) -> &str {
        "mlp"
    }

    fn context_len(&self) -> usize {
        self.w1_t.cols()
    }

    fn horizon(&self) -> usize {
        self.w2_t.rows()
    }

    fn forecast_one(&self, context: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::column_vector(context);
        let h = self.w1_t.matmul(&x)?.add_col_broadcast(&self.b1)?.map(|v| v.max(0.0));
        Ok(self.w2_t.matmul(&h)?.add_col_broadcast(&self.b2)?.into_vec())
    }

    fn tape_forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let h = tape.block_left_mul(x, self.w1_t.clone())?;
        let h = tape.block_row_bias(h, self.b1.clone())?;
        let h = tape.relu(h);
        let y = tape.block_left_mul(h, self.w2_t.clone())?;
        tape.block_row_bias(y, self.b2.clone())
    }

    fn checksum(&self) -> String {
        digest_matrices(&[&self.w1_t, &Matrix::column_vector(&self.b1), &self.w2_t, &Matrix::column_vector(&self.b2)])
    }
}
