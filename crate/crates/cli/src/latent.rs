//! Two-dimensional projections of adapter latent codes.

use adapts_core::adapters::Adapter;
use adapts_core::numkit::{pca_fit, pca_transform};
use adapts_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::pipeline::{Prepared, WindowSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub x: f64,
    pub y: f64,
    pub split: String,
    pub window: usize,
}

/// One point per window: the latent code of its last context step.
pub fn latent_points(ad: &Adapter, contexts: &[Matrix]) -> CliResult<Matrix> {
    let codes = ad.encode_batch(contexts)?;
    let rows: Vec<Matrix> = codes.iter().map(|z| z.slice_rows(z.rows() - 1, z.rows())).collect();
    Ok(Matrix::vstack(&rows)?)
}

/// One point per window: the scaled data row at its last context step,
/// before any per-window normalization.
pub fn raw_points(prepared: &Prepared, set: &WindowSet) -> CliResult<Matrix> {
    let l = set.model.contexts.first().map_or(0, |c| c.rows());
    let rows: Vec<Matrix> =
        set.model.starts.iter().map(|&s| prepared.dataset.values.slice_rows(s + l - 1, s + l)).collect();
    Ok(Matrix::vstack(&rows)?)
}

/// Train and test points projected onto their first two principal
/// components (fit on both splits together).
pub fn project(train: &Matrix, test: &Matrix) -> CliResult<Vec<LatentRow>> {
    let all = Matrix::vstack(&[train.clone(), test.clone()])?;
    let k = all.cols().min(2);
    let model = pca_fit(&all, k)?;
    let mut rows = Vec::with_capacity(all.rows());
    for (split, pts) in [("train", train), ("test", test)] {
        let proj = pca_transform(&model, pts)?;
        for w in 0..proj.rows() {
            let y = if k == 2 { proj[(w, 1)] } else { 0.0 };
            rows.push(LatentRow { x: proj[(w, 0)], y, split: split.to_string(), window: w });
        }
    }
    Ok(rows)
}

pub fn export_latent(ad: &Adapter, prepared: &Prepared) -> CliResult<Vec<LatentRow>> {
    let train = latent_points(ad, &prepared.train.model.contexts)?;
    let test = latent_points(ad, &prepared.test.model.contexts)?;
    project(&train, &test)
}

/// The same projection applied to the scaled data itself.
pub fn export_raw(prepared: &Prepared) -> CliResult<Vec<LatentRow>> {
    project(&raw_points(prepared, &prepared.train)?, &raw_points(prepared, &prepared.test)?)
}

/// Train/test separation in latent space and in the scaled data space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub latent_gap: f64,
    pub raw_gap: f64,
}

/// Distance between the train and test centroids, per coordinate divided by
/// the pooled standard deviation.
pub fn split_gap(rows: &[LatentRow]) -> f64 {
    let coords = |r: &LatentRow| [r.x, r.y];
    let mut gap = 0.0;
    for c in 0..2 {
        let pick = |split: &str| -> Vec<f64> { rows.iter().filter(|r| r.split == split).map(|r| coords(r)[c]).collect() };
        let (a, b) = (pick("train"), pick("test"));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let pooled = (0.5 * (var(&a, ma) + var(&b, mb))).sqrt();
        if pooled > 0.0 {
            gap += ((ma - mb) / pooled).powi(2);
        }
    }
    gap.sqrt()
}
