//! Dataset, forecaster and window preparation shared by the commands, plus
//! the train and evaluate steps.

use adapts_core::adapters::{train_adapter, Adapter, TrainOutcome};
use adapts_core::data::{
    generate_synthetic_with, load_csv, make_windows, revin_batch, revin_denormalize, temporal_folds, PreprocessConfig,
    Preprocessor, RevinState, Split, SplitRanges, TimeSeriesDataset, WindowBatch,
};
use adapts_core::eval::{default_levels, empirical_coverage, metrics_report, MetricsReport, ReliabilityTable, MIN_SAMPLES};
use adapts_core::forecaster::{random_linear_fm, random_mlp_fm, ForecasterKind, FrozenForecaster, LinearFm};
use adapts_core::{Matrix, Rng};

use crate::config::{DataSource, ExperimentConfig};
use crate::error::{CliError, CliResult};

/// Independent streams derived from the run seed.
#[derive(Debug, Clone)]
pub struct Streams {
    pub data: Rng,
    pub forecaster: Rng,
    pub init: Rng,
    pub train: Rng,
    pub eval: Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let root = Rng::new(seed);
        Self { data: root.split(0), forecaster: root.split(1), init: root.split(2), train: root.split(3), eval: root.split(4) }
    }
}

pub fn load_dataset(cfg: &ExperimentConfig, rng: &mut Rng) -> CliResult<TimeSeriesDataset> {
    let d = &cfg.dataset;
    match d.source {
        DataSource::Synthetic => {
            let mut ds = generate_synthetic_with(rng, d.mode, d.length, &d.synthetic)?;
            ds.split = SplitRanges::from_fractions(ds.len(), d.train_frac, d.val_frac)?;
            Ok(ds)
        }
        DataSource::Csv => {
            let path = d.path.as_ref().expect("validated");
            Ok(load_csv(path, d.date_column, d.train_frac, d.val_frac)?)
        }
    }
}

pub fn build_forecaster(cfg: &ExperimentConfig, rng: &mut Rng) -> CliResult<Box<dyn FrozenForecaster>> {
    let (l, h) = (cfg.dataset.context_len, cfg.dataset.horizon);
    let f = &cfg.forecaster;
    Ok(match f.kind {
        ForecasterKind::LinearRandom => Box::new(random_linear_fm(rng, l, h)?),
        ForecasterKind::MlpRandom => Box::new(random_mlp_fm(rng, l, h, f.mlp_hidden)?),
        ForecasterKind::LinearFixed => {
            let fm = LinearFm::from_json_file(f.path.as_ref().expect("validated"))?;
            if fm.context_len() != l || fm.horizon() != h {
                return Err(CliError::Config(format!(
                    "forecaster file is L={} H={}, dataset uses L={l} H={h}",
                    fm.context_len(),
                    fm.horizon()
                )));
            }
            Box::new(fm)
        }
    })
}

/// Windows as the adapter sees them, with what is needed to map its output
/// back to the scaled data space.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub model: WindowBatch,
    pub states: Option<Vec<RevinState>>,
    /// Targets in the scaled data space.
    pub targets: Vec<Matrix>,
}

impl WindowSet {
    pub fn from_batch(batch: WindowBatch, revin: bool) -> CliResult<Self> {
        let targets = batch.targets.clone();
        if revin {
            let (model, states) = revin_batch(&batch)?;
            Ok(Self { model, states: Some(states), targets })
        } else {
            Ok(Self { model: batch, states: None, targets })
        }
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    /// Maps one window's model-space forecast to the scaled space.
    pub fn restore(&self, window: usize, pred: &Matrix) -> CliResult<Matrix> {
        match &self.states {
            Some(s) => Ok(revin_denormalize(pred, &s[window])?),
            None => Ok(pred.clone()),
        }
    }
}

/// Scaled dataset and its three window sets.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: TimeSeriesDataset,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
}

pub fn prepare(cfg: &ExperimentConfig, raw: &TimeSeriesDataset) -> CliResult<Prepared> {
    let d = &cfg.dataset;
    let pre = Preprocessor::fit(raw, &PreprocessConfig { scaler: d.scaler, full_pca: false, revin: d.revin })?;
    let dataset = pre.transform_dataset(raw)?;
    let cut = |split: Split| -> CliResult<WindowSet> {
        let batch = make_windows(&dataset, split, d.context_len, d.horizon, d.stride)?;
        WindowSet::from_batch(batch, d.revin)
    };
    let train = cut(Split::Train)?;
    let val = if dataset.split.val.len() >= d.context_len + d.horizon {
        cut(Split::Val)?
    } else {
        WindowSet::from_batch(WindowBatch { contexts: Vec::new(), targets: Vec::new(), starts: Vec::new() }, false)?
    };
    let test = cut(Split::Test)?;
    Ok(Prepared { dataset, train, val, test })
}

/// Everything built from one config and seed before training.
pub struct Setup {
    pub prepared: Prepared,
    pub fm: Box<dyn FrozenForecaster>,
    pub streams: Streams,
}

pub fn setup(cfg: &ExperimentConfig) -> CliResult<Setup> {
    let mut streams = Streams::new(cfg.training.seed);
    let raw = load_dataset(cfg, &mut streams.data)?;
    let prepared = prepare(cfg, &raw)?;
    let fm = build_forecaster(cfg, &mut streams.forecaster)?;
    Ok(Setup { prepared, fm, streams })
}

pub struct Trained {
    pub outcome: TrainOutcome,
    /// Learning rate picked by k-fold selection, when it ran.
    pub selected_lr: Option<f64>,
}

/// Mean out-of-fold validation MSE for one config over `k` contiguous folds
/// of the train split.
pub fn kfold_score(cfg: &ExperimentConfig, fm: &dyn FrozenForecaster, prepared: &Prepared, streams: &Streams) -> CliResult<f64> {
    let d = &cfg.dataset;
    let folds = temporal_folds(&prepared.dataset, cfg.training.k_folds, d.context_len, d.horizon, d.stride)?;
    let mut total = 0.0;
    for (f, (tr, va)) in folds.into_iter().enumerate() {
        let tr = WindowSet::from_batch(tr, d.revin)?;
        let va = WindowSet::from_batch(va, d.revin)?;
        let ad = Adapter::new(cfg.adapter.clone(), prepared.dataset.n_channels(), &mut streams.init.clone())?;
        let mut rng = streams.train.split(1000 + f as u64);
        let out = train_adapter(&ad, fm, &tr.model, &va.model, &cfg.training.optim(), &mut rng)?;
        total += evaluate(&out.adapter, fm, &va, 1, &streams.eval)?.0.mse;
    }
    Ok(total / cfg.training.k_folds as f64)
}

pub fn train(cfg: &ExperimentConfig, s: &Setup) -> CliResult<Trained> {
    let mut cfg = cfg.clone();
    let mut selected_lr = None;
    if cfg.search.select && cfg.adapter.kind.is_trainable() && !cfg.search.lr.is_empty() {
        let mut best: Option<(f64, f64)> = None;
        for &lr in &cfg.search.lr {
            let mut trial = cfg.clone();
            trial.training.lr = lr;
            let score = kfold_score(&trial, s.fm.as_ref(), &s.prepared, &s.streams)?;
            log::info!("k-fold lr {lr}: {score:.6}");
            if best.map_or(true, |(b, _)| score < b) {
                best = Some((score, lr));
            }
        }
        let lr = best.expect("non-empty grid").1;
        cfg.training.lr = lr;
        selected_lr = Some(lr);
    }
    let ad = Adapter::new(cfg.adapter.clone(), s.prepared.dataset.n_channels(), &mut s.streams.init.clone())?;
    let outcome = train_adapter(
        &ad,
        s.fm.as_ref(),
        &s.prepared.train.model,
        &s.prepared.val.model,
        &cfg.training.optim(),
        &mut s.streams.train.clone(),
    )?;
    Ok(Trained { outcome, selected_lr })
}

/// Point metrics and, for stochastic adapters with enough samples, the
/// reliability table. Stochastic point forecasts are the sample mean.
pub fn evaluate(
    ad: &Adapter,
    fm: &dyn FrozenForecaster,
    set: &WindowSet,
    s_samples: usize,
    rng: &Rng,
) -> CliResult<(MetricsReport, Option<ReliabilityTable>)> {
    if set.is_empty() {
        return Err(CliError::Config("no windows to evaluate".into()));
    }
    if ad.d_in() != set.model.n_channels() {
        return Err(CliError::Core(adapts_core::Error::Shape(format!(
            "checkpoint expects {} channels, dataset has {}",
            ad.d_in(),
            set.model.n_channels()
        ))));
    }
    if !ad.is_stochastic() {
        let preds = ad.predict_batch(fm, &set.model.contexts)?;
        let preds: Vec<Matrix> = preds.iter().enumerate().map(|(w, p)| set.restore(w, p)).collect::<CliResult<_>>()?;
        return Ok((metrics_report(&preds, &set.targets)?, None));
    }
    let dists = ad.mc_predict_batch(fm, &set.model.contexts, s_samples, rng)?;
    let mut restored = Vec::with_capacity(dists.len());
    for (w, d) in dists.iter().enumerate() {
        let samples: Vec<Matrix> = d.samples().iter().map(|s| set.restore(w, s)).collect::<CliResult<_>>()?;
        restored.push(adapts_core::adapters::ForecastDistribution::new(samples)?);
    }
    let means: Vec<Matrix> = restored.iter().map(|d| d.mean()).collect();
    let metrics = metrics_report(&means, &set.targets)?;
    let reliability = if s_samples >= MIN_SAMPLES {
        Some(empirical_coverage(&restored, &set.targets, &default_levels())?)
    } else {
        log::warn!("{s_samples} samples is below {MIN_SAMPLES}; skipping calibration");
        None
    };
    Ok((metrics, reliability))
}
