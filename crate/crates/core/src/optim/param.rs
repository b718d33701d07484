use serde::{Deserialize, Serialize};

use super::Gradients;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// A named trainable matrix with its gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    value: Matrix,
    #[serde(skip)]
    grad: Option<Matrix>,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        Self { name: name.into(), value, grad: None }
    }

    pub fn value(&self) -> &Matrix {
        &self.value
    }

    /// Replaces the value; the shape must not change.
    pub fn set_value(&mut self, value: Matrix) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::mismatch("set_value", self.value.shape(), value.shape()));
        }
        self.value = value;
        Ok(())
    }

    pub(crate) fn value_mut(&mut self) -> &mut Matrix {
        &mut self.value
    }

    /// Current gradient, zero if none has been loaded.
    pub fn grad(&self) -> Matrix {
        self.grad.clone().unwrap_or_else(|| Matrix::zeros(self.value.rows(), self.value.cols()))
    }

    pub fn set_grad(&mut self, grad: Matrix) -> Result<()> {
        if grad.shape() != self.value.shape() {
            return Err(Error::mismatch("set_grad", self.value.shape(), grad.shape()));
        }
        self.grad = Some(grad);
        Ok(())
    }
}

/// An ordered collection of parameters. Indices are stable and are the
/// handles used when placing parameters on a [`super::Tape`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.params.push(Param::new(name, value));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, index: usize) -> &Param {
        &self.params[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Param {
        &mut self.params[index]
    }

    pub fn value(&self, index: usize) -> &Matrix {
        self.params[index].value()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copies each parameter's adjoint out of `grads`; parameters absent from
    /// the tape get zero.
    pub fn load_grads(&mut self, grads: &Gradients) -> Result<()> {
        for (i, p) in self.params.iter_mut().enumerate() {
            let g = match grads.param(i) {
                Some(g) => g.clone(),
                None => Matrix::zeros(p.value.rows(), p.value.cols()),
            };
            p.set_grad(g)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }
}
