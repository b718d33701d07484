//! Train-fit preprocessing applied to whole datasets, and per-window RevIN.

use serde::{Deserialize, Serialize};

use super::dataset::{Split, TimeSeriesDataset};
use super::revin::{revin_normalize, RevinState, REVIN_EPS};
use super::scaler::{fit_scaler, Scaler, ScalerKind};
use super::windows::WindowBatch;
use crate::error::Result;
use crate::numkit::{pca_fit, pca_inverse, pca_transform, Matrix, PcaModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub scaler: ScalerKind,
    /// Rotate onto all principal components after scaling.
    pub full_pca: bool,
    pub revin: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { scaler: ScalerKind::Standard, full_pca: false, revin: true }
    }
}

/// Scaler and optional PCA rotation, both fit on the train split only.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pub config: PreprocessConfig,
    pub scaler: Scaler,
    pub pca: Option<PcaModel>,
}

impl Preprocessor {
    pub fn fit(ds: &TimeSeriesDataset, config: &PreprocessConfig) -> Result<Self> {
        let train = ds.split_values(Split::Train);
        let scaler = fit_scaler(config.scaler, &train)?;
        let pca = if config.full_pca {
            Some(pca_fit(&scaler.apply(&train)?, ds.n_channels())?)
        } else {
            None
        };
        Ok(Self { config: config.clone(), scaler, pca })
    }

    pub fn transform(&self, values: &Matrix) -> Result<Matrix> {
        let scaled = self.scaler.apply(values)?;
        match &self.pca {
            Some(p) => pca_transform(p, &scaled),
            None => Ok(scaled),
        }
    }

    pub fn inverse(&self, values: &Matrix) -> Result<Matrix> {
        let unrotated = match &self.pca {
            Some(p) => pca_inverse(p, values)?,
            None => values.clone(),
        };
        self.scaler.invert(&unrotated)
    }

    pub fn transform_dataset(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        ds.with_values(self.transform(&ds.values)?)
    }
}

/// Normalizes every context by its own statistics and maps the target with
/// the same statistics.
pub fn revin_batch(batch: &WindowBatch) -> Result<(WindowBatch, Vec<RevinState>)> {
    let mut out = batch.clone();
    let mut states = Vec::with_capacity(batch.len());
    for (i, (c, t)) in batch.contexts.iter().zip(&batch.targets).enumerate() {
        let (cn, st) = revin_normalize(c, REVIN_EPS)?;
        out.contexts[i] = cn;
        out.targets[i] = Matrix::from_fn(t.rows(), t.cols(), |r, j| (t[(r, j)] - st.mean[j]) / st.std[j]);
        states.push(st);
    }
    Ok((out, states))
}
