use rayon::prelude::*;

use super::config::{AdapterConfig, AdapterKind, Sigma2};
use super::distribution::ForecastDistribution;
use crate::error::{Error, Result};
use crate::forecaster::{forecast_blocks, FrozenForecaster};
use crate::numkit::{glorot_uniform, Matrix, Rng};
use crate::optim::{NodeId, ParamSet, Tape};

/// Bounds applied to a decoder-predicted log-variance.
pub const LOG_SIGMA2_MIN: f64 = -8.0;
pub const LOG_SIGMA2_MAX: f64 = 8.0;

/// An encoder/decoder pair wrapped around a frozen forecaster.
///
/// Every weight lives in one [`ParamSet`] under a fixed name, including the
/// fitted (non-trainable) matrices of the PCA and closed-form kinds, so
/// checkpointing treats all kinds alike.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapter {
    pub config: AdapterConfig,
    d_in: usize,
    d_latent: usize,
    params: ParamSet,
}

/// Random draws for one stochastic forward pass over a stack of windows.
/// `None` entries mean the deterministic path: no dropout, `ε = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Noise {
    pub enc_mask: Option<Matrix>,
    pub dec_mask: Option<Matrix>,
    pub eps: Option<Matrix>,
}

impl Noise {
    /// The mean path.
    pub fn none() -> Self {
        Self::default()
    }
}

/// Node handles for one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct AdapterGraph {
    /// `(B·H) × D` prediction.
    pub pred: NodeId,
    /// `(B·L) × D′` latent fed to the forecaster.
    pub latent: NodeId,
    pub mu: Option<NodeId>,
    pub log_var: Option<NodeId>,
    /// Clamped per-cell log σ² when the likelihood variance is learned.
    pub log_sigma2: Option<NodeId>,
}

fn linear_layer(rng: &mut Rng, params: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize) {
    params.push(format!("{name}_w"), glorot_uniform(rng, fan_in, fan_out));
    params.push(format!("{name}_b"), Matrix::zeros(1, fan_out));
}

fn dropout_mask(rng: &mut Rng, rows: usize, cols: usize, p: f64) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    Matrix::from_fn(rows, cols, |_, _| if rng.bernoulli(p) { 0.0 } else { keep })
}

impl Adapter {
    /// Fresh adapter: Glorot-uniform weights and zero biases. PCA and
    /// closed-form kinds start at the identity until fitted.
    pub fn new(config: AdapterConfig, d_in: usize, rng: &mut Rng) -> Result<Self> {
        let d_latent = config.validate(d_in)?;
        let mut params = ParamSet::new();
        let dec_out = if config.kind.is_vae() && config.sigma2 == Sigma2::Auto { 2 * d_in } else { d_in };
        match config.kind {
            AdapterKind::Identity => {}
            AdapterKind::Pca => {
                params.push("pca_mean", Matrix::zeros(1, d_in));
                params.push("pca_components", Matrix::from_fn(d_in, d_latent, |i, j| f64::from(i == j)));
            }
            AdapterKind::ClosedFormLinear => {
                params.push("w", Matrix::identity(d_in));
                params.push("w_pinv", Matrix::identity(d_in));
            }
            AdapterKind::LinearAe | AdapterKind::DropoutLinearAe => {
                linear_layer(rng, &mut params, "enc", d_in, d_latent);
                linear_layer(rng, &mut params, "dec", d_latent, d_in);
            }
            AdapterKind::LinearEncOnly => linear_layer(rng, &mut params, "enc", d_in, d_in),
            AdapterKind::LinearDecOnly => linear_layer(rng, &mut params, "dec", d_in, d_in),
            AdapterKind::LinearVae => {
                linear_layer(rng, &mut params, "enc_mu", d_in, d_latent);
                linear_layer(rng, &mut params, "enc_lv", d_in, d_latent);
                linear_layer(rng, &mut params, "dec", d_latent, dec_out);
            }
            AdapterKind::DeepVae => {
                let h = config.hidden;
                for i in 0..config.layers {
                    linear_layer(rng, &mut params, &format!("enc_h{i}"), if i == 0 { d_in } else { h }, h);
                }
                linear_layer(rng, &mut params, "enc_mu", h, d_latent);
                linear_layer(rng, &mut params, "enc_lv", h, d_latent);
                for i in 0..config.layers {
                    linear_layer(rng, &mut params, &format!("dec_h{i}"), if i == 0 { d_latent } else { h }, h);
                }
                linear_layer(rng, &mut params, "dec_out", h, dec_out);
            }
        }
        Ok(Self { config, d_in, d_latent, params })
    }

    /// Rebuilds an adapter from stored parameters, checking every expected
    /// tensor is present with the right shape.
    pub fn from_params(config: AdapterConfig, d_in: usize, params: ParamSet) -> Result<Self> {
        let template = Self::new(config.clone(), d_in, &mut Rng::new(0))?;
        if template.params.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "{} expects {} tensors, found {}",
                config.kind,
                template.params.len(),
                params.len()
            )));
        }
        for (want, got) in template.params.iter().zip(params.iter()) {
            if want.name != got.name || want.value().shape() != got.value().shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor '{}' {:?} does not match expected '{}' {:?}",
                    got.name,
                    got.value().shape(),
                    want.name,
                    want.value().shape()
                )));
            }
        }
        Ok(Self { d_latent: template.d_latent, config, d_in, params })
    }

    pub fn kind(&self) -> AdapterKind {
        self.config.kind
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_latent(&self) -> usize {
        self.d_latent
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn is_stochastic(&self) -> bool {
        self.kind().is_stochastic()
    }

    fn auto_sigma(&self) -> bool {
        self.kind().is_vae() && self.config.sigma2 == Sigma2::Auto
    }

    pub(crate) fn set_param(&mut self, name: &str, value: Matrix) -> Result<()> {
        let i = self.params.index_of(name).ok_or_else(|| Error::InvalidArgument(format!("no parameter '{name}'")))?;
        self.params.get_mut(i).set_value(value)
    }

    /// Draws masks and `ε` for `n_windows` windows of `l` context and `h`
    /// horizon steps. Deterministic kinds draw nothing.
    pub fn sample_noise(&self, n_windows: usize, l: usize, h: usize, rng: &mut Rng) -> Noise {
        let mut noise = Noise::none();
        match self.kind() {
            AdapterKind::DropoutLinearAe if self.config.dropout_p > 0.0 => {
                let p = self.config.dropout_p;
                noise.enc_mask = Some(dropout_mask(rng, n_windows * l, self.d_latent, p));
                noise.dec_mask = Some(dropout_mask(rng, n_windows * h, self.d_latent, p));
            }
            AdapterKind::LinearVae | AdapterKind::DeepVae => {
                noise.eps = Some(rng.normal_matrix(n_windows * l, self.d_latent));
            }
            _ => {}
        }
        noise
    }

    /// Places every parameter on the tape; node `i` carries parameter `i`.
    pub fn place_params(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.params.iter().enumerate().map(|(i, p)| tape.param(i, p.value().clone())).collect()
    }

    fn node(&self, nodes: &[NodeId], name: &str) -> NodeId {
        nodes[self.params.index_of(name).expect("parameter names fixed at construction")]
    }

    fn affine(&self, tape: &mut Tape, nodes: &[NodeId], x: NodeId, name: &str) -> Result<NodeId> {
        let y = tape.matmul(x, self.node(nodes, &format!("{name}_w")))?;
        tape.add_row(y, self.node(nodes, &format!("{name}_b")))
    }

    /// Encoder on a `(rows) × D` stack. Returns `(z, mu, log_var)`.
    pub fn encode_graph(
        &self,
        tape: &mut Tape,
        nodes: &[NodeId],
        x: NodeId,
        noise: &Noise,
    ) -> Result<(NodeId, Option<NodeId>, Option<NodeId>)> {
        let (rows, cols) = tape.value(x).shape();
        if cols != self.d_in {
            return Err(Error::Shape(format!("adapter expects {} channels, input has {cols}", self.d_in)));
        }
        let vae_heads = |tape: &mut Tape, h: NodeId| -> Result<(NodeId, Option<NodeId>, Option<NodeId>)> {
            let mu = self.affine(tape, nodes, h, "enc_mu")?;
            let lv = self.affine(tape, nodes, h, "enc_lv")?;
            let z = match &noise.eps {
                Some(eps) => {
                    if eps.shape() != (rows, self.d_latent) {
                        return Err(Error::mismatch("reparam noise", (rows, self.d_latent), eps.shape()));
                    }
                    tape.reparam(mu, lv, eps.clone())?
                }
                None => mu,
            };
            Ok((z, Some(mu), Some(lv)))
        };
        match self.kind() {
            AdapterKind::Identity | AdapterKind::LinearDecOnly => Ok((x, None, None)),
            AdapterKind::Pca => {
                let neg_mean = tape.scale(self.node(nodes, "pca_mean"), -1.0);
                let centered = tape.add_row(x, neg_mean)?;
                Ok((tape.matmul(centered, self.node(nodes, "pca_components"))?, None, None))
            }
            AdapterKind::ClosedFormLinear => Ok((tape.matmul(x, self.node(nodes, "w"))?, None, None)),
            AdapterKind::LinearAe | AdapterKind::LinearEncOnly => Ok((self.affine(tape, nodes, x, "enc")?, None, None)),
            AdapterKind::DropoutLinearAe => {
                let z = self.affine(tape, nodes, x, "enc")?;
                let z = match &noise.enc_mask {
                    Some(m) => tape.mul_const(z, m.clone())?,
                    None => z,
                };
                Ok((z, None, None))
            }
            AdapterKind::LinearVae => vae_heads(tape, x),
            AdapterKind::DeepVae => {
                let mut h = x;
                for i in 0..self.config.layers {
                    let a = self.affine(tape, nodes, h, &format!("enc_h{i}"))?;
                    h = tape.relu(a);
                }
                vae_heads(tape, h)
            }
        }
    }

    /// Decoder on forecaster output. Returns `(prediction, log σ²)`.
    pub fn decode_graph(&self, tape: &mut Tape, nodes: &[NodeId], f: NodeId, noise: &Noise) -> Result<(NodeId, Option<NodeId>)> {
        let out = match self.kind() {
            AdapterKind::Identity | AdapterKind::LinearEncOnly => f,
            AdapterKind::Pca => {
                let ct = tape.transpose(self.node(nodes, "pca_components"));
                let back = tape.matmul(f, ct)?;
                tape.add_row(back, self.node(nodes, "pca_mean"))?
            }
            AdapterKind::ClosedFormLinear => tape.matmul(f, self.node(nodes, "w_pinv"))?,
            AdapterKind::LinearAe | AdapterKind::LinearDecOnly | AdapterKind::LinearVae => self.affine(tape, nodes, f, "dec")?,
            AdapterKind::DropoutLinearAe => {
                let f = match &noise.dec_mask {
                    Some(m) => tape.mul_const(f, m.clone())?,
                    None => f,
                };
                self.affine(tape, nodes, f, "dec")?
            }
            AdapterKind::DeepVae => {
                let mut h = f;
                for i in 0..self.config.layers {
                    let a = self.affine(tape, nodes, h, &format!("dec_h{i}"))?;
                    h = tape.relu(a);
                }
                self.affine(tape, nodes, h, "dec_out")?
            }
        };
        if self.auto_sigma() {
            let d = self.d_in;
            let mean = tape.slice_cols(out, 0, d)?;
            let raw = tape.slice_cols(out, d, 2 * d)?;
            let ls = tape.clamp(raw, LOG_SIGMA2_MIN, LOG_SIGMA2_MAX);
            Ok((mean, Some(ls)))
        } else {
            Ok((out, None))
        }
    }

    /// `dec(f_FM(enc(X)))` for a stack of `L`-row windows.
    pub fn graph(&self, tape: &mut Tape, nodes: &[NodeId], fm: &dyn FrozenForecaster, x: NodeId, noise: &Noise) -> Result<AdapterGraph> {
        self.graph_inner(tape, nodes, fm, x, noise, true)
    }

    /// With `differentiable = false` the forecaster runs through
    /// [`forecast_blocks`] and enters the tape as a constant, so any
    /// forecaster works for inference.
    fn graph_inner(
        &self,
        tape: &mut Tape,
        nodes: &[NodeId],
        fm: &dyn FrozenForecaster,
        x: NodeId,
        noise: &Noise,
        differentiable: bool,
    ) -> Result<AdapterGraph> {
        let (latent, mu, log_var) = self.encode_graph(tape, nodes, x, noise)?;
        let f = if differentiable {
            fm.tape_forward(tape, latent)?
        } else {
            let out = forecast_blocks(fm, tape.value(latent))?;
            tape.constant(out)
        };
        let (pred, log_sigma2) = self.decode_graph(tape, nodes, f, noise)?;
        Ok(AdapterGraph { pred, latent, mu, log_var, log_sigma2 })
    }

    /// Forward pass over `contexts` with the given noise. Returns per-window
    /// predictions and, under learned variance, per-window log σ².
    pub fn forward_batch(
        &self,
        fm: &dyn FrozenForecaster,
        contexts: &[Matrix],
        noise: &Noise,
    ) -> Result<(Vec<Matrix>, Option<Vec<Matrix>>)> {
        self.check_fm(fm)?;
        if contexts.is_empty() {
            return Ok((Vec::new(), None));
        }
        let mut tape = Tape::new();
        let nodes = self.place_params(&mut tape);
        let x = tape.constant(Matrix::vstack(contexts)?);
        let g = self.graph_inner(&mut tape, &nodes, fm, x, noise, false)?;
        let h = fm.horizon();
        let preds = tape.value(g.pred).split_rows(h);
        let ls = g.log_sigma2.map(|id| tape.value(id).split_rows(h));
        Ok((preds, ls))
    }

    /// Mean-path prediction for one `L × D` context: no dropout, `z = μ`.
    pub fn predict(&self, fm: &dyn FrozenForecaster, x: &Matrix) -> Result<Matrix> {
        let (mut p, _) = self.forward_batch(fm, std::slice::from_ref(x), &Noise::none())?;
        Ok(p.remove(0))
    }

    /// Mean-path predictions for many contexts.
    pub fn predict_batch(&self, fm: &dyn FrozenForecaster, contexts: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(self.forward_batch(fm, contexts, &Noise::none())?.0)
    }

    /// One stochastic forward pass per window: fresh dropout masks or `ε`.
    pub fn sample_batch(&self, fm: &dyn FrozenForecaster, contexts: &[Matrix], rng: &mut Rng) -> Result<Vec<Matrix>> {
        let noise = self.sample_noise(contexts.len(), fm.context_len(), fm.horizon(), rng);
        let (mut preds, ls) = self.forward_batch(fm, contexts, &noise)?;
        if let Some(ls) = ls {
            for (p, l) in preds.iter_mut().zip(&ls) {
                for (v, s) in p.as_mut_slice().iter_mut().zip(l.as_slice()) {
                    *v += (0.5 * s).exp() * rng.normal();
                }
            }
        }
        Ok(preds)
    }

    /// `s` stochastic passes over each context. Pass `i` uses child stream
    /// `rng.split(i)`, so results do not depend on scheduling.
    pub fn mc_predict_batch(
        &self,
        fm: &dyn FrozenForecaster,
        contexts: &[Matrix],
        s: usize,
        rng: &Rng,
    ) -> Result<Vec<ForecastDistribution>> {
        if s == 0 {
            return Err(Error::InvalidArgument("mc_predict needs at least one sample".into()));
        }
        let passes: Result<Vec<Vec<Matrix>>> =
            (0..s).into_par_iter().map(|i| self.sample_batch(fm, contexts, &mut rng.split(i as u64))).collect();
        let mut passes = passes?;
        let mut per_window: Vec<Vec<Matrix>> = (0..contexts.len()).map(|_| Vec::with_capacity(s)).collect();
        for pass in passes.iter_mut() {
            for (w, p) in pass.drain(..).enumerate() {
                per_window[w].push(p);
            }
        }
        per_window.into_iter().map(ForecastDistribution::new).collect()
    }

    /// Latent codes for a stack of contexts (`z = μ`, no dropout).
    pub fn encode_batch(&self, contexts: &[Matrix]) -> Result<Vec<Matrix>> {
        if contexts.is_empty() {
            return Ok(Vec::new());
        }
        let l = contexts[0].rows();
        let mut tape = Tape::new();
        let nodes = self.place_params(&mut tape);
        let x = tape.constant(Matrix::vstack(contexts)?);
        let (z, _, _) = self.encode_graph(&mut tape, &nodes, x, &Noise::none())?;
        Ok(tape.value(z).split_rows(l))
    }

    pub(crate) fn check_fm(&self, fm: &dyn FrozenForecaster) -> Result<()> {
        if fm.context_len() == 0 || fm.horizon() == 0 {
            return Err(Error::InvalidArgument("forecaster has empty context or horizon".into()));
        }
        Ok(())
    }
}

/// `s` stochastic forecasts for one context.
pub fn mc_predict(ad: &Adapter, fm: &dyn FrozenForecaster, x: &Matrix, s: usize, rng: &Rng) -> Result<ForecastDistribution> {
    Ok(ad.mc_predict_batch(fm, std::slice::from_ref(x), s, rng)?.remove(0))
}

/// `dec(f_FM(enc(x)))` for one context. Without an rng the mean path is
/// used; stochastic kinds need one to sample.
pub fn adapter_forward(ad: &Adapter, fm: &dyn FrozenForecaster, x: &Matrix, rng: Option<&mut Rng>) -> Result<Matrix> {
    match rng {
        Some(r) => Ok(ad.sample_batch(fm, std::slice::from_ref(x), r)?.remove(0)),
        None => ad.predict(fm, x),
    }
}
