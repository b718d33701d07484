//! The optimal linear adapter around a linear forecaster.
//!
//! With `f(X) = W_FMᵀX + b1ᵀ` and an invertible map `W`, the adapted
//! forecast is `W_FMᵀX + B·W⁻¹`, so the loss depends on `W` only through
//! `M = W⁻¹`: `L(M) = ‖A − B·M‖²_F` with `A = Y − W_FMᵀX`, `B = b1ᵀ`. That
//! quadratic is minimized by `M* = (BᵀB)⁺BᵀA`, and `W* = (BᵀA)⁺BᵀB` is its
//! pseudo-inverse.

use super::model::Adapter;
use super::config::AdapterKind;
use crate::error::{Error, Result};
use crate::forecaster::{linear_fm_forecast, LinearFm};
use crate::numkit::{default_rcond, pinv, regularized_inverse, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormFit {
    /// `D × D` adapter matrix.
    pub w: Matrix,
    /// Its pseudo-inverse, used as the decoder.
    pub w_pinv: Matrix,
    /// Stationary point of the quadratic in `M`.
    pub m_star: Matrix,
    /// `B = 0`: every `W` gives the same loss and the identity is returned.
    pub degenerate: bool,
}

/// Stacked `A = Y − W_FMᵀX` and `B = b1ᵀ` over windows.
pub fn closed_form_residuals(contexts: &[Matrix], targets: &[Matrix], fm: &LinearFm) -> Result<(Matrix, Matrix)> {
    if contexts.len() != targets.len() || contexts.is_empty() {
        return Err(Error::InvalidArgument(format!("{} contexts for {} targets", contexts.len(), targets.len())));
    }
    let d = contexts[0].cols();
    let h = fm.b_fm().len();
    let mut a_blocks = Vec::with_capacity(contexts.len());
    let zero_bias = LinearFm::new(fm.w_fm().clone(), vec![0.0; h])?;
    for (x, y) in contexts.iter().zip(targets) {
        if y.shape() != (h, d) {
            return Err(Error::mismatch("closed_form_residuals", (h, d), y.shape()));
        }
        a_blocks.push(y.sub(&linear_fm_forecast(&zero_bias, x)?)?);
    }
    let b_block = Matrix::from_fn(h, d, |i, _| fm.b_fm()[i]);
    let a = Matrix::vstack(&a_blocks)?;
    let b = Matrix::vstack(&vec![b_block; contexts.len()])?;
    Ok((a, b))
}

/// `W* = (BᵀA)⁺BᵀB` when `lambda = 0`, else `(BᵀA + λI)⁻¹BᵀB`.
pub fn fit_from_residuals(a: &Matrix, b: &Matrix, lambda: f64) -> Result<ClosedFormFit> {
    if a.shape() != b.shape() {
        return Err(Error::mismatch("fit_closed_form", a.shape(), b.shape()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let d = a.cols();
    let bta = b.t_matmul(a)?;
    let btb = b.t_matmul(b)?;
    let m_star = pinv(&btb, default_rcond(&btb))?.matmul(&bta)?;
    if b.max_abs() == 0.0 {
        log::warn!("forecaster bias is zero; the loss does not depend on the adapter, returning identity");
        return Ok(ClosedFormFit { w: Matrix::identity(d), w_pinv: Matrix::identity(d), m_star, degenerate: true });
    }
    let w = if lambda == 0.0 {
        pinv(&bta, default_rcond(&bta))?.matmul(&btb)?
    } else {
        regularized_inverse(&bta, lambda)?.matmul(&btb)?
    };
    let w_pinv = pinv(&w, default_rcond(&w))?;
    Ok(ClosedFormFit { w, w_pinv, m_star, degenerate: false })
}

/// Fit on a single `L × D` context and `H × D` target.
pub fn fit_closed_form(x: &Matrix, y: &Matrix, fm: &LinearFm, lambda: f64) -> Result<ClosedFormFit> {
    fit_closed_form_stacked(std::slice::from_ref(x), std::slice::from_ref(y), fm, lambda)
}

/// Fit on many windows at once (their residuals stacked).
pub fn fit_closed_form_stacked(contexts: &[Matrix], targets: &[Matrix], fm: &LinearFm, lambda: f64) -> Result<ClosedFormFit> {
    let (a, b) = closed_form_residuals(contexts, targets, fm)?;
    fit_from_residuals(&a, &b, lambda)
}

/// `‖A − B·M‖²_F`.
pub fn reduced_loss(a: &Matrix, b: &Matrix, m: &Matrix) -> Result<f64> {
    Ok(a.sub(&b.matmul(m)?)?.as_slice().iter().map(|v| v * v).sum())
}

/// `∇_M ‖A − B·M‖²_F = −2Bᵀ(A − B·M)`.
pub fn reduced_gradient(a: &Matrix, b: &Matrix, m: &Matrix) -> Result<Matrix> {
    Ok(b.t_matmul(&a.sub(&b.matmul(m)?)?)?.scale(-2.0))
}

impl Adapter {
    /// Loads a closed-form fit into a `closed_form_linear` adapter.
    pub fn set_closed_form(&mut self, fit: &ClosedFormFit) -> Result<()> {
        if self.kind() != AdapterKind::ClosedFormLinear {
            return Err(Error::InvalidArgument(format!("cannot load a closed-form fit into a {} adapter", self.kind())));
        }
        self.set_param("w", fit.w.clone())?;
        self.set_param("w_pinv", fit.w_pinv.clone())
    }
}
