//! A small reverse-mode autodiff tape over matrix values.
//!
//! Nodes are appended in evaluation order, so the tape is always
//! topologically sorted and [`Tape::backward`] is a single reverse sweep.
//! Only the primitives the adapters need are supported.

use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<usize> },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `n × c` plus a `1 × c` row broadcast over rows.
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Transpose(NodeId),
    /// Elementwise product with a constant (dropout masks).
    MulConst(NodeId, Matrix),
    Relu(NodeId),
    Gelu(NodeId),
    Exp(NodeId),
    Clamp(NodeId, f64, f64),
    SliceCols(NodeId, usize),
    Sum(NodeId),
    /// Input is a vertical stack of `k.cols()`-row blocks; each block is
    /// replaced by `k · block`.
    BlockLeftMul { input: NodeId, kernel: Matrix },
    /// Adds `bias[i]` to row `i` of every `bias.len()`-row block.
    BlockRowBias(NodeId),
    /// `mu + exp(½·log_var) ⊙ eps` with `eps` held fixed.
    Reparam { mu: NodeId, log_var: NodeId, eps: Matrix },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf { param: None }, value)
    }

    /// A leaf whose adjoint is reported under `param_index`.
    pub fn param(&mut self, param_index: usize, value: Matrix) -> NodeId {
        self.push(Op::Leaf { param: Some(param_index) }, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let r = self.value(row);
        if r.rows() != 1 {
            return Err(Error::mismatch("add_row", self.shape(a), r.shape()));
        }
        let v = self.value(a).add_row_broadcast(r.as_slice())?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let v = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), v)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(Op::Transpose(a), v)
    }

    pub fn mul_const(&mut self, a: NodeId, c: Matrix) -> Result<NodeId> {
        let v = self.value(a).hadamard(&c)?;
        Ok(self.push(Op::MulConst(a, c), v))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(gelu);
        self.push(Op::Gelu(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (_, c) = self.shape(a);
        if start >= end || end > c {
            return Err(Error::Shape(format!("column slice {start}..{end} out of range for {c} columns")));
        }
        let v = self.value(a).slice_cols(start, end);
        Ok(self.push(Op::SliceCols(a, start), v))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::filled(1, 1, self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    pub fn block_left_mul(&mut self, input: NodeId, kernel: Matrix) -> Result<NodeId> {
        let x = self.value(input);
        let block_in = kernel.cols();
        if block_in == 0 || x.rows() % block_in != 0 {
            return Err(Error::mismatch("block_left_mul", x.shape(), kernel.shape()));
        }
        let blocks: Result<Vec<Matrix>> = x.split_rows(block_in).iter().map(|b| kernel.matmul(b)).collect();
        let v = Matrix::vstack(&blocks?)?;
        Ok(self.push(Op::BlockLeftMul { input, kernel }, v))
    }

    pub fn block_row_bias(&mut self, input: NodeId, bias: Vec<f64>) -> Result<NodeId> {
        let x = self.value(input);
        let block = bias.len();
        if block == 0 || x.rows() % block != 0 {
            return Err(Error::mismatch("block_row_bias", x.shape(), (block, 1)));
        }
        let mut v = x.clone();
        for i in 0..v.rows() {
            let b = bias[i % block];
            v.row_mut(i).iter_mut().for_each(|o| *o += b);
        }
        Ok(self.push(Op::BlockRowBias(input), v))
    }

    pub fn reparam(&mut self, mu: NodeId, log_var: NodeId, eps: Matrix) -> Result<NodeId> {
        let m = self.value(mu);
        let lv = self.value(log_var);
        if m.shape() != lv.shape() || m.shape() != eps.shape() {
            return Err(Error::mismatch("reparam", m.shape(), lv.shape()));
        }
        let std = lv.map(|x| (0.5 * x).exp());
        let v = m.add(&std.hadamard(&eps)?)?;
        Ok(self.push(Op::Reparam { mu, log_var, eps }, v))
    }

    /// Hash of the active side of every ReLU and clamp on the tape. Two
    /// evaluations with equal signatures lie in the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(a) => {
                    for &x in self.value(*a).as_slice() {
                        (x > 0.0).hash(&mut h);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    for &x in self.value(*a).as_slice() {
                        ((x < *lo) as u8 + 2 * (x > *hi) as u8).hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar `loss` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::Shape(format!("backward needs a 1x1 loss, got {r}x{c}")));
        }
        let n = loss.0 + 1;
        let mut adj: Vec<Option<Matrix>> = vec![None; n];
        adj[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..n).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { .. } => {
                    adj[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut adj, *a, ga)?;
                    accumulate(&mut adj, *b, gb)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *b, g.clone())?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *b, g.scale(-1.0))?;
                }
                Op::Mul(a, b) => {
                    let ga = g.hadamard(self.value(*b))?;
                    let gb = g.hadamard(self.value(*a))?;
                    accumulate(&mut adj, *a, ga)?;
                    accumulate(&mut adj, *b, gb)?;
                }
                Op::AddRow(a, row) => {
                    let col_sums = Matrix::row_vector(&column_sums(&g));
                    accumulate(&mut adj, *a, g.clone())?;
                    accumulate(&mut adj, *row, col_sums)?;
                }
                Op::Scale(a, f) => accumulate(&mut adj, *a, g.scale(*f))?,
                Op::Transpose(a) => accumulate(&mut adj, *a, g.transpose())?,
                Op::MulConst(a, c) => accumulate(&mut adj, *a, g.hadamard(c)?)?,
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = Matrix::from_fn(g.rows(), g.cols(), |i, j| if x[(i, j)] > 0.0 { g[(i, j)] } else { 0.0 });
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let ga = Matrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * gelu_grad(x[(i, j)]));
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Exp(a) => accumulate(&mut adj, *a, g.hadamard(&node.value)?)?,
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    let ga = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                        let v = x[(i, j)];
                        if v < *lo || v > *hi {
                            0.0
                        } else {
                            g[(i, j)]
                        }
                    });
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.shape(*a);
                    let mut ga = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut adj, *a, ga)?;
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.shape(*a);
                    accumulate(&mut adj, *a, Matrix::filled(rows, cols, g[(0, 0)]))?;
                }
                Op::BlockLeftMul { input, kernel } => {
                    let blocks: Result<Vec<Matrix>> = g.split_rows(kernel.rows()).iter().map(|b| kernel.t_matmul(b)).collect();
                    accumulate(&mut adj, *input, Matrix::vstack(&blocks?)?)?;
                }
                Op::BlockRowBias(input) => accumulate(&mut adj, *input, g.clone())?,
                Op::Reparam { mu, log_var, eps } => {
                    let lv = self.value(*log_var);
                    let glv = Matrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * 0.5 * (0.5 * lv[(i, j)]).exp() * eps[(i, j)]);
                    accumulate(&mut adj, *mu, g.clone())?;
                    accumulate(&mut adj, *log_var, glv)?;
                }
            }
        }

        let mut param_grads: Vec<(usize, Matrix)> = Vec::new();
        let adjoints: Vec<Matrix> = adj
            .into_iter()
            .enumerate()
            .map(|(i, a)| a.unwrap_or_else(|| Matrix::zeros(self.nodes[i].value.rows(), self.nodes[i].value.cols())))
            .collect();
        for (i, node) in self.nodes[..n].iter().enumerate() {
            if let Op::Leaf { param: Some(p) } = node.op {
                match param_grads.iter_mut().find(|(q, _)| *q == p) {
                    Some((_, acc)) => acc.add_assign(&adjoints[i])?,
                    None => param_grads.push((p, adjoints[i].clone())),
                }
            }
        }
        Ok(Gradients { adjoints, param_grads })
    }
}

fn column_sums(g: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; g.cols()];
    for i in 0..g.rows() {
        for (s, v) in sums.iter_mut().zip(g.row(i)) {
            *s += v;
        }
    }
    sums
}

fn accumulate(adj: &mut [Option<Matrix>], id: NodeId, g: Matrix) -> Result<()> {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Adjoints from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    adjoints: Vec<Matrix>,
    param_grads: Vec<(usize, Matrix)>,
}

impl Gradients {
    /// Adjoint of any node recorded before the loss.
    pub fn wrt(&self, id: NodeId) -> &Matrix {
        &self.adjoints[id.0]
    }

    /// Summed adjoint over every leaf registered under `param_index`, or
    /// `None` if that parameter was never placed on the tape.
    pub fn param(&self, param_index: usize) -> Option<&Matrix> {
        self.param_grads.iter().find(|(p, _)| *p == param_index).map(|(_, g)| g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn linear_case() {
        let mut t = Tape::new();
        let w = t.param(0, Matrix::from_rows(&[[2.0]]));
        let x = t.constant(Matrix::from_rows(&[[3.0]]));
        let y = t.matmul(w, x).unwrap();
        let loss = t.sum(y);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.param(0).unwrap(), &Matrix::from_rows(&[[3.0]]));
    }

    #[test]
    fn least_squares_gradient() {
        let mut rng = Rng::new(1);
        let xm = rng.normal_matrix(6, 3);
        let ym = rng.normal_matrix(6, 2);
        let wm = rng.normal_matrix(3, 2);
        let mut t = Tape::new();
        let x = t.constant(xm.clone());
        let y = t.constant(ym.clone());
        let w = t.param(0, wm.clone());
        let xw = t.matmul(x, w).unwrap();
        let r = t.sub(y, xw).unwrap();
        let sq = t.mul(r, r).unwrap();
        let loss = t.sum(sq);
        let g = t.backward(loss).unwrap();
        let resid = ym.sub(&xm.matmul(&wm).unwrap()).unwrap();
        let expected = xm.t_matmul(&resid).unwrap().scale(-2.0);
        assert!(g.param(0).unwrap().rel_diff(&expected) < 1e-12);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 2));
        assert!(t.backward(a).is_err());
    }

    #[test]
    fn unused_param_gets_zero_grad() {
        let mut t = Tape::new();
        let unused = t.param(1, Matrix::filled(2, 2, 5.0));
        let w = t.param(0, Matrix::filled(1, 1, 2.0));
        let loss = t.sum(w);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.wrt(unused), &Matrix::zeros(2, 2));
        assert_eq!(g.param(1).unwrap(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn reparam_gradients() {
        let mut t = Tape::new();
        let mu = t.param(0, Matrix::from_rows(&[[0.5, -1.0]]));
        let lv = t.param(1, Matrix::from_rows(&[[0.2, -0.4]]));
        let eps = Matrix::from_rows(&[[1.5, -0.5]]);
        let z = t.reparam(mu, lv, eps).unwrap();
        let loss = t.sum(z);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.param(0).unwrap(), &Matrix::from_rows(&[[1.0, 1.0]]));
        let expected = [0.5 * (0.1f64).exp() * 1.5, 0.5 * (-0.2f64).exp() * -0.5];
        for (a, b) in g.param(1).unwrap().as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn block_ops_match_per_block_products() {
        let mut rng = Rng::new(2);
        let k = rng.normal_matrix(2, 3);
        let x = rng.normal_matrix(6, 2);
        let mut t = Tape::new();
        let xi = t.param(0, x.clone());
        let y = t.block_left_mul(xi, k.clone()).unwrap();
        let y = t.block_row_bias(y, vec![1.0, -1.0]).unwrap();
        let expected: Vec<Matrix> = x
            .split_rows(3)
            .iter()
            .map(|b| k.matmul(b).unwrap().add_col_broadcast(&[1.0, -1.0]).unwrap())
            .collect();
        assert_eq!(t.value(y), &Matrix::vstack(&expected).unwrap());
    }
}
