use serde::{Deserialize, Serialize};

use super::closed_form::fit_closed_form_stacked;
use super::config::AdapterKind;
use super::model::Adapter;
use crate::data::WindowBatch;
use crate::error::{Error, Result};
use crate::forecaster::FrozenForecaster;
use crate::numkit::{pca_fit, Matrix, Rng};
use crate::optim::{adam_step, schedule_lr, AdamConfig, AdamState, LrSchedule, ScheduleKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub adam: AdamConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 32, lr: 1e-3, schedule: ScheduleKind::default(), adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training objective over the epoch's batches.
    pub train_loss: f64,
    pub train_nll: f64,
    pub train_kl: f64,
    /// Mean-path MSE per cell on the validation windows.
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub adapter: Adapter,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mean-path MSE per cell over a batch of windows.
pub(crate) fn batch_mse(ad: &Adapter, fm: &dyn FrozenForecaster, batch: &WindowBatch) -> Result<f64> {
    let preds = ad.predict_batch(fm, &batch.contexts)?;
    let mut ss = 0.0;
    let mut n = 0usize;
    for (p, t) in preds.iter().zip(&batch.targets) {
        ss += p.as_slice().iter().zip(t.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        n += t.len();
    }
    Ok(ss / n as f64)
}

/// Fits or trains `ad` on `train`, selecting on `val`. Fixed-map kinds are
/// fitted in one shot (PCA on the stacked training contexts, the closed
/// form on the stacked training windows); the identity is returned as is.
pub fn train_adapter(
    ad: &Adapter,
    fm: &dyn FrozenForecaster,
    train: &WindowBatch,
    val: &WindowBatch,
    cfg: &TrainingConfig,
    rng: &mut Rng,
) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training stream is empty".into()));
    }
    if train.n_channels() != ad.d_in() {
        return Err(Error::Shape(format!("adapter expects {} channels, data has {}", ad.d_in(), train.n_channels())));
    }
    if train.context_len() != fm.context_len() || train.horizon() != fm.horizon() {
        return Err(Error::Shape(format!(
            "windows are L={} H={}, forecaster expects L={} H={}",
            train.context_len(),
            train.horizon(),
            fm.context_len(),
            fm.horizon()
        )));
    }
    let mut out = ad.clone();
    match ad.kind() {
        AdapterKind::Identity => return Ok(TrainOutcome { adapter: out, history: Vec::new(), best_epoch: 0 }),
        AdapterKind::Pca => {
            let model = pca_fit(&train.stacked_contexts()?, ad.d_latent())?;
            out.set_param("pca_mean", Matrix::row_vector(&model.mean))?;
            out.set_param("pca_components", model.components)?;
            return fitted(out, fm, val);
        }
        AdapterKind::ClosedFormLinear => {
            let linear = fm.as_linear().ok_or_else(|| {
                Error::InvalidArgument(format!("closed_form_linear needs a linear forecaster, got '{}'", fm.name()))
            })?;
            let fit = fit_closed_form_stacked(&train.contexts, &train.targets, linear, ad.config.lambda)?;
            out.set_closed_form(&fit)?;
            return fitted(out, fm, val);
        }
        _ => {}
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("epochs and batch_size must be >= 1".into()));
    }

    let objective = ad.default_objective();
    let elbo = ad.elbo_settings();
    let (l, h) = (fm.context_len(), fm.horizon());
    let mut sched = LrSchedule::new(cfg.schedule.clone(), cfg.lr)?;
    let mut lr = sched.initial_lr();
    let mut adam = AdamState::new(out.params(), cfg.adam);
    let mut best: Option<(f64, Adapter, usize)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if matches!(cfg.schedule, ScheduleKind::OneCycle { .. }) {
            lr = schedule_lr(&mut sched, epoch, 0.0);
        }
        let mut erng = rng.split(epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        erng.shuffle(&mut order);
        let (mut loss_sum, mut nll_sum, mut kl_sum) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.select(chunk);
            let noise = out.sample_noise(chunk.len(), l, h, &mut erng);
            let (value, grads) = out.evaluate_loss(fm, &batch.contexts, &batch.targets, &noise, objective, elbo, true)?;
            if !value.loss.is_finite() {
                return Err(Error::Diverged(format!("loss is {} at epoch {epoch}", value.loss)));
            }
            let grads = grads.expect("gradients requested");
            out.params_mut().load_grads(&grads)?;
            adam_step(&mut adam, out.params_mut(), lr)?;
            let w = chunk.len() as f64;
            loss_sum += value.loss * w;
            nll_sum += value.nll * w;
            kl_sum += value.kl * w;
        }
        let n = train.len() as f64;
        let train_loss = loss_sum / n;
        let val_mse = if val.is_empty() { batch_mse(&out, fm, train)? } else { batch_mse(&out, fm, val)? };
        if !val_mse.is_finite() {
            return Err(Error::Diverged(format!("validation MSE is {val_mse} at epoch {epoch}")));
        }
        history.push(EpochRecord { epoch, lr, train_loss, train_nll: nll_sum / n, train_kl: kl_sum / n, val_mse });
        log::debug!("epoch {epoch}: loss {train_loss:.6} val_mse {val_mse:.6} lr {lr:.2e}");
        if best.as_ref().map_or(true, |(b, _, _)| val_mse < *b) {
            best = Some((val_mse, out.clone(), epoch));
        }
        if matches!(cfg.schedule, ScheduleKind::ReduceOnPlateau { .. }) {
            lr = schedule_lr(&mut sched, epoch, val_mse);
        }
    }
    let (_, adapter, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { adapter, history, best_epoch })
}

fn fitted(ad: Adapter, fm: &dyn FrozenForecaster, val: &WindowBatch) -> Result<TrainOutcome> {
    let history = if val.is_empty() {
        Vec::new()
    } else {
        let val_mse = batch_mse(&ad, fm, val)?;
        vec![EpochRecord { epoch: 0, lr: 0.0, train_loss: 0.0, train_nll: 0.0, train_kl: 0.0, val_mse }]
    };
    Ok(TrainOutcome { adapter: ad, history, best_epoch: 0 })
}
