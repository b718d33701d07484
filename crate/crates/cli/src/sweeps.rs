//! Latent-width and β/σ² sweeps: one train and evaluate per grid cell.

use adapts_core::adapters::{Adapter, AdapterConfig, AdapterKind, Sigma2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline::{evaluate, train, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub d_latent: usize,
    pub mse: f64,
    pub mae: f64,
    /// Identity adapter on the same test windows.
    pub identity_mse: f64,
}

/// Test MSE of the configured adapter at each latent width. An empty list
/// means every width from 1 to the channel count.
pub fn sweep_components(cfg: &ExperimentConfig, s: &Setup, widths: &[usize]) -> CliResult<Vec<ComponentRow>> {
    let d = s.prepared.dataset.n_channels();
    let widths: Vec<usize> = if widths.is_empty() { (1..=d).collect() } else { widths.to_vec() };
    if let Some(bad) = widths.iter().find(|k| **k == 0 || **k > d) {
        return Err(CliError::Config(format!("d_latent {bad} is outside 1..={d}")));
    }
    let id = Adapter::new(AdapterConfig::of_kind(AdapterKind::Identity), d, &mut s.streams.init.clone())?;
    let identity_mse = evaluate(&id, s.fm.as_ref(), &s.prepared.test, cfg.output.s_samples, &s.streams.eval)?.0.mse;
    widths
        .par_iter()
        .map(|&k| {
            let mut c = cfg.clone();
            c.adapter.d_latent = Some(k);
            let t = train(&c, s)?;
            let (m, _) = evaluate(&t.outcome.adapter, s.fm.as_ref(), &s.prepared.test, c.output.s_samples, &s.streams.eval)?;
            Ok(ComponentRow { d_latent: k, mse: m.mse, mae: m.mae, identity_mse })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSigmaRow {
    pub beta: f64,
    /// `None` for the learned-variance column.
    pub log_sigma2: Option<f64>,
    pub mse: f64,
    pub mae: f64,
    pub ece: Option<f64>,
    /// KL and likelihood terms of the final training epoch.
    pub kl: f64,
    pub nll: f64,
}

impl BetaSigmaRow {
    pub fn sigma_label(&self) -> String {
        self.log_sigma2.map_or_else(|| "auto".to_string(), |v| v.to_string())
    }
}

/// Every `(β, log σ²)` pair, then every `(β, auto)` pair when enabled.
pub fn sweep_beta_sigma(cfg: &ExperimentConfig, s: &Setup, betas: &[f64], log_sigma2: &[f64], include_auto: bool) -> CliResult<Vec<BetaSigmaRow>> {
    if !cfg.adapter.kind.is_vae() {
        return Err(CliError::Config(format!("sweep-beta-sigma needs a VAE adapter, got {}", cfg.adapter.kind)));
    }
    let mut cells: Vec<(f64, Option<f64>)> = Vec::new();
    for &b in betas {
        for &ls in log_sigma2 {
            cells.push((b, Some(ls)));
        }
    }
    if include_auto {
        cells.extend(betas.iter().map(|&b| (b, None)));
    }
    cells
        .par_iter()
        .map(|&(beta, ls)| {
            let mut c = cfg.clone();
            c.adapter.beta = beta;
            c.adapter.sigma2 = ls.map_or(Sigma2::Auto, |v| Sigma2::Fixed(v.exp()));
            let t = train(&c, s)?;
            let (m, r) = evaluate(&t.outcome.adapter, s.fm.as_ref(), &s.prepared.test, c.output.s_samples, &s.streams.eval)?;
            let last = t.outcome.history.last().expect("trainable kinds record epochs");
            Ok(BetaSigmaRow { beta, log_sigma2: ls, mse: m.mse, mae: m.mae, ece: r.map(|r| r.ece), kl: last.train_kl, nll: last.train_nll })
        })
        .collect()
}
