//! Identity vs. PCA vs. closed-form linear adapters around many random
//! linear forecasters.

use adapts_core::adapters::{
    closed_form_residuals, fit_from_residuals, reduced_loss, Adapter, AdapterConfig, AdapterKind,
};
use adapts_core::data::{
    generate_synthetic_with, make_windows, Split, SplitRanges, SyntheticConfig, SyntheticMode, WindowBatch,
};
use adapts_core::numkit::{default_rcond, pca_fit, pinv};
use adapts_core::forecaster::random_linear_fm;
use adapts_core::{Matrix, Rng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearExperimentConfig {
    pub n_trials: usize,
    pub mode: SyntheticMode,
    pub seed: u64,
    pub length: usize,
    pub context_len: usize,
    pub horizon: usize,
    pub stride: usize,
    /// PCA width; defaults to the number of base signals.
    pub pca_components: Option<usize>,
    /// Ridge term for the extra ridge column.
    pub ridge_lambda: f64,
    pub synthetic: SyntheticConfig,
}

impl LinearExperimentConfig {
    pub fn new(n_trials: usize, mode: SyntheticMode, seed: u64) -> Self {
        Self {
            n_trials,
            mode,
            seed,
            length: 2048,
            context_len: 96,
            horizon: 24,
            stride: 8,
            pca_components: None,
            ridge_lambda: 1e-4,
            synthetic: SyntheticConfig::linear_experiment(),
        }
    }
}

/// Per-cell MSE of each adapter for one random forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub identity: f64,
    pub pca: f64,
    /// `W_FMᵀX + B·W*⁺`, the model the closed form optimizes.
    pub closed_form: f64,
    /// `dec(f(enc(X)))` with `enc = W*`, `dec = W*⁺`.
    pub closed_form_forward: f64,
    pub closed_form_ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSummary {
    pub config: LinearExperimentConfig,
    pub n_channels: usize,
    pub pca_components: usize,
    pub median_identity: f64,
    pub median_pca: f64,
    pub median_closed_form: f64,
    pub median_closed_form_forward: f64,
    pub median_closed_form_ridge: f64,
    /// The expected ordering for the mode held.
    pub ordering_holds: bool,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn cell_mse(a: &Matrix, b_fit: &Matrix) -> f64 {
    a.as_slice().iter().zip(b_fit.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn batch_mse(preds: &[Matrix], targets: &[Matrix]) -> f64 {
    let mut ss = 0.0;
    let mut n = 0;
    for (p, t) in preds.iter().zip(targets) {
        ss += p.as_slice().iter().zip(t.as_slice()).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        n += t.len();
    }
    ss / n as f64
}

fn trial(cfg: &LinearExperimentConfig, windows: &WindowBatch, pca: &Adapter, idx: usize) -> CliResult<TrialRow> {
    let mut rng = Rng::new(cfg.seed).split(1).split(idx as u64);
    let fm = random_linear_fm(&mut rng, cfg.context_len, cfg.horizon)?;
    let d = windows.n_channels();
    let identity = Adapter::new(AdapterConfig::of_kind(AdapterKind::Identity), d, &mut rng)?;
    let id_mse = batch_mse(&identity.predict_batch(&fm, &windows.contexts)?, &windows.targets);
    let pca_mse = batch_mse(&pca.predict_batch(&fm, &windows.contexts)?, &windows.targets);

    let (a, b) = closed_form_residuals(&windows.contexts, &windows.targets, &fm)?;
    let fit = fit_from_residuals(&a, &b, 0.0)?;
    let reduced = reduced_loss(&a, &b, &fit.w_pinv)? / a.len() as f64;
    let mut cf = Adapter::new(AdapterConfig { lambda: 0.0, ..AdapterConfig::of_kind(AdapterKind::ClosedFormLinear) }, d, &mut rng)?;
    cf.set_closed_form(&fit)?;
    let forward = batch_mse(&cf.predict_batch(&fm, &windows.contexts)?, &windows.targets);

    let ridge = fit_from_residuals(&a, &b, cfg.ridge_lambda)?;
    let ridge_m = pinv(&ridge.w, default_rcond(&ridge.w))?;
    let ridge_mse = cell_mse(&a, &b.matmul(&ridge_m)?);
    Ok(TrialRow {
        trial: idx,
        identity: id_mse,
        pca: pca_mse,
        closed_form: reduced,
        closed_form_forward: forward,
        closed_form_ridge: ridge_mse,
    })
}

/// Runs every trial (in parallel, rows in trial order) and summarizes.
pub fn run_linear_experiment(cfg: &LinearExperimentConfig) -> CliResult<(Vec<TrialRow>, LinearSummary)> {
    if cfg.n_trials == 0 {
        return Err(CliError::Config("n_trials must be >= 1".into()));
    }
    let mut data_rng = Rng::new(cfg.seed).split(0);
    let mut ds = generate_synthetic_with(&mut data_rng, cfg.mode, cfg.length, &cfg.synthetic)?;
    ds.split = SplitRanges::from_counts(ds.len(), 0, 0);
    let windows = make_windows(&ds, Split::Train, cfg.context_len, cfg.horizon, cfg.stride)?;
    let d = ds.n_channels();
    let k = cfg.pca_components.unwrap_or(cfg.synthetic.n_bases).min(d);

    let model = pca_fit(&ds.values, k)?;
    let mut pca = Adapter::new(AdapterConfig { d_latent: Some(k), ..AdapterConfig::of_kind(AdapterKind::Pca) }, d, &mut Rng::new(0))?;
    let mean_idx = pca.params().index_of("pca_mean").expect("pca adapter has a mean");
    let comp_idx = pca.params().index_of("pca_components").expect("pca adapter has components");
    pca.params_mut().get_mut(mean_idx).set_value(Matrix::row_vector(&model.mean))?;
    pca.params_mut().get_mut(comp_idx).set_value(model.components)?;

    let rows: Vec<TrialRow> = (0..cfg.n_trials).into_par_iter().map(|i| trial(cfg, &windows, &pca, i)).collect::<CliResult<_>>()?;
    let col = |f: fn(&TrialRow) -> f64| median(&mut rows.iter().map(f).collect::<Vec<_>>());
    let (mi, mp, mc) = (col(|r| r.identity), col(|r| r.pca), col(|r| r.closed_form));
    let ordering_holds = match cfg.mode {
        SyntheticMode::Uncorrelated => mc <= mi / 5.0 && ((mp - mi) / mi).abs() < 0.05,
        SyntheticMode::Correlated => mp <= 2.0 * mc && mp < mi && mc < mi,
    };
    let summary = LinearSummary {
        config: cfg.clone(),
        n_channels: d,
        pca_components: k,
        median_identity: mi,
        median_pca: mp,
        median_closed_form: mc,
        median_closed_form_forward: col(|r| r.closed_form_forward),
        median_closed_form_ridge: col(|r| r.closed_form_ridge),
        ordering_holds,
    };
    Ok((rows, summary))
}

pub fn trial_csv_rows(rows: &[TrialRow], summary: &LinearSummary) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.identity.to_string(),
                r.pca.to_string(),
                r.closed_form.to_string(),
                r.closed_form_forward.to_string(),
                r.closed_form_ridge.to_string(),
            ]
        })
        .collect();
    out.push(vec![
        "median".into(),
        summary.median_identity.to_string(),
        summary.median_pca.to_string(),
        summary.median_closed_form.to_string(),
        summary.median_closed_form_forward.to_string(),
        summary.median_closed_form_ridge.to_string(),
    ]);
    out
}

pub const TRIAL_HEADER: [&str; 6] = ["trial", "identity", "pca", "closed_form", "closed_form_forward", "closed_form_ridge"];
