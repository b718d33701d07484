//! Feature-space adapters around a frozen forecaster: fixed maps (identity,
//! PCA, the closed-form linear solution), trainable linear autoencoders and
//! their dropout and variational variants, and a deep VAE.

mod checkpoint;
mod closed_form;
mod config;
mod distribution;
mod loss;
mod model;
mod train;
mod vae;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use closed_form::{
    closed_form_residuals, fit_closed_form, fit_closed_form_stacked, fit_from_residuals, reduced_gradient, reduced_loss,
    ClosedFormFit,
};
pub use config::{AdapterConfig, AdapterKind, Sigma2};
pub use distribution::{quantile_sorted, ForecastDistribution};
pub use loss::{ElboSettings, LossNodes, LossValue, Objective};
pub use model::{adapter_forward, mc_predict, Adapter, AdapterGraph, Noise, LOG_SIGMA2_MAX, LOG_SIGMA2_MIN};
pub use train::{train_adapter, EpochRecord, TrainOutcome, TrainingConfig};
pub use vae::{gaussian_nll, kl_standard_normal, vae_elbo_loss, vae_encode, LatentCode};
