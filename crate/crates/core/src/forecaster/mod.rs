//! The frozen univariate forecaster contract and two in-repo stand-ins.
//!
//! A forecaster maps one `L`-step context column to one `H`-step forecast.
//! Multivariate inputs are handled channel by channel by
//! [`apply_channel_independent`]; forecasters never see more than one
//! channel at a time.

mod linear;
mod mlp;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use linear::{linear_fm_forecast, random_linear_fm, LinearFm};
pub use mlp::{random_mlp_fm, MlpFm, DEFAULT_MLP_HIDDEN};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::optim::{NodeId, Tape};

/// A univariate forecaster with frozen weights.
pub trait FrozenForecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Context length `L`.
    fn context_len(&self) -> usize;

    /// Horizon `H`.
    fn horizon(&self) -> usize;

    fn forecast_one(&self, context: &[f64]) -> Result<Vec<f64>>;

    /// Forward pass on a tape. `x` is a vertical stack of `L`-row window
    /// blocks with one column per channel; the result stacks `H`-row blocks.
    /// Gradients flow to `x` only; the forecaster's weights enter as
    /// constants.
    fn tape_forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let _ = (tape, x);
        Err(Error::InvalidArgument(format!("forecaster '{}' does not support gradient-based training", self.name())))
    }

    /// The linear parameterization, when the forecaster has one.
    fn as_linear(&self) -> Option<&LinearFm> {
        None
    }

    /// Hex digest of the weights, used to check the forecaster stays frozen.
    fn checksum(&self) -> String;
}

/// Same contract as [`FrozenForecaster::tape_forward`] without a tape:
/// forecasts every column of every `L`-row block of `x`.
pub fn forecast_blocks(fm: &dyn FrozenForecaster, x: &Matrix) -> Result<Matrix> {
    let l = fm.context_len();
    if l == 0 || x.rows() % l != 0 {
        return Err(Error::Shape(format!("{} rows is not a whole number of {l}-step contexts", x.rows())));
    }
    let blocks = x.split_rows(l);
    let out = apply_channel_independent(fm, &blocks)?;
    Matrix::vstack(&out)
}

/// Applies `fm` to each channel (column) of each context independently.
/// Windows are processed in parallel; the result order matches the input.
pub fn apply_channel_independent(fm: &dyn FrozenForecaster, contexts: &[Matrix]) -> Result<Vec<Matrix>> {
    let l = fm.context_len();
    let h = fm.horizon();
    contexts
        .par_iter()
        .enumerate()
        .map(|(window, x)| {
            if x.rows() != l {
                return Err(Error::Forecaster {
                    window,
                    channel: 0,
                    source: Box::new(Error::Shape(format!("context has {} rows, forecaster expects {l}", x.rows()))),
                });
            }
            let mut out = Matrix::zeros(h, x.cols());
            for channel in 0..x.cols() {
                let col = x.column(channel);
                if col.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Forecaster {
                        window,
                        channel,
                        source: Box::new(Error::InvalidArgument("context contains non-finite values".into())),
                    });
                }
                let y = fm.forecast_one(&col).map_err(|e| Error::Forecaster { window, channel, source: Box::new(e) })?;
                if y.len() != h {
                    return Err(Error::Forecaster {
                        window,
                        channel,
                        source: Box::new(Error::Shape(format!("forecast has {} steps, expected {h}", y.len()))),
                    });
                }
                out.set_column(channel, &y);
            }
            Ok(out)
        })
        .collect()
}

pub(crate) fn digest_matrices(parts: &[&Matrix]) -> String {
    let mut hasher = Sha256::new();
    for m in parts {
        hasher.update((m.rows() as u64).to_le_bytes());
        hasher.update((m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            hasher.update(v.to_le_bytes());
        }
    }
    hex::encode(hasher.finalize())
}

/// Forecaster selection by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    LinearRandom,
    LinearFixed,
    MlpRandom,
}

impl std::str::FromStr for ForecasterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-random" => Ok(Self::LinearRandom),
            "linear-fixed" => Ok(Self::LinearFixed),
            "mlp-random" => Ok(Self::MlpRandom),
            other => Err(Error::InvalidArgument(format!(
                "unknown forecaster '{other}' (expected linear-random, linear-fixed or mlp-random)"
            ))),
        }
    }
}
