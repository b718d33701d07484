//! Variational pieces: posterior sampling and the closed-form terms of the
//! evidence lower bound.

use std::f64::consts::PI;

use super::config::Sigma2;
use super::loss::{ElboSettings, LossValue, Objective};
use super::model::{Adapter, Noise};
use crate::error::{Error, Result};
use crate::forecaster::FrozenForecaster;
use crate::numkit::{Matrix, Rng};
use crate::optim::Tape;

/// Encoder output for one `L × D` context.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub z: Matrix,
    pub mu: Option<Matrix>,
    pub log_var: Option<Matrix>,
    /// The noise used to draw `z`, when sampled.
    pub eps: Option<Matrix>,
}

/// `KL(N(μ, diag exp(log_var)) ‖ N(0, I)) = ½ Σ (μ² + σ² − 1 − log σ²)`.
pub fn kl_standard_normal(mu: &Matrix, log_var: &Matrix) -> Result<f64> {
    if mu.shape() != log_var.shape() {
        return Err(Error::mismatch("kl_standard_normal", mu.shape(), log_var.shape()));
    }
    Ok(0.5 * mu.as_slice().iter().zip(log_var.as_slice()).map(|(m, lv)| m * m + lv.exp() - 1.0 - lv).sum::<f64>())
}

/// `(1/(2σ²))‖r‖²_F + (n/2)·log(2πσ²)` over the `n` cells of `resid`.
pub fn gaussian_nll(resid: &Matrix, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be > 0, got {sigma2}")));
    }
    let ss: f64 = resid.as_slice().iter().map(|v| v * v).sum();
    Ok(ss / (2.0 * sigma2) + 0.5 * resid.len() as f64 * (2.0 * PI * sigma2).ln())
}

/// Encodes one context. With an rng, `z = μ + exp(½·log_var)⊙ε`; without,
/// `z = μ`.
pub fn vae_encode(ad: &Adapter, x: &Matrix, rng: Option<&mut Rng>) -> Result<LatentCode> {
    if !ad.kind().is_vae() {
        return Err(Error::InvalidArgument(format!("vae_encode needs a VAE adapter, got {}", ad.kind())));
    }
    let noise = match rng {
        Some(r) => Noise { eps: Some(r.normal_matrix(x.rows(), ad.d_latent())), ..Noise::none() },
        None => Noise::none(),
    };
    let mut tape = Tape::new();
    let nodes = ad.place_params(&mut tape);
    let xn = tape.constant(x.clone());
    let (z, mu, lv) = ad.encode_graph(&mut tape, &nodes, xn, &noise)?;
    Ok(LatentCode {
        z: tape.value(z).clone(),
        mu: mu.map(|m| tape.value(m).clone()),
        log_var: lv.map(|l| tape.value(l).clone()),
        eps: noise.eps,
    })
}

/// Negative ELBO for one window with a single reparameterized sample.
pub fn vae_elbo_loss(
    ad: &Adapter,
    fm: &dyn FrozenForecaster,
    x: &Matrix,
    y: &Matrix,
    beta: f64,
    sigma2: Sigma2,
    rng: &mut Rng,
) -> Result<LossValue> {
    if !ad.kind().is_vae() {
        return Err(Error::InvalidArgument(format!("vae_elbo_loss needs a VAE adapter, got {}", ad.kind())));
    }
    let noise = ad.sample_noise(1, x.rows(), y.rows(), rng);
    let elbo = ElboSettings { beta, sigma2 };
    let (value, _) = ad.evaluate_loss(fm, std::slice::from_ref(x), std::slice::from_ref(y), &noise, Objective::Elbo, elbo, false)?;
    Ok(value)
}
