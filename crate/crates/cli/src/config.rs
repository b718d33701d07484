//! Experiment configuration, read from TOML.
//!
//! Every key has a default, unknown keys are rejected, and a resolved config
//! serializes back to the same value.

use std::path::{Path, PathBuf};

use adapts_core::adapters::{AdapterConfig, TrainingConfig};
use adapts_core::data::{ScalerKind, SyntheticConfig, SyntheticMode};
use adapts_core::forecaster::{ForecasterKind, DEFAULT_MLP_HIDDEN};
use adapts_core::optim::{AdamConfig, ScheduleKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// CSV file, for `source = "csv"`.
    pub path: Option<PathBuf>,
    /// Whether the first CSV column is a timestamp to skip.
    pub date_column: bool,
    pub mode: SyntheticMode,
    /// Series length for synthetic data.
    pub length: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub context_len: usize,
    pub horizon: usize,
    pub stride: usize,
    pub scaler: ScalerKind,
    pub revin: bool,
    pub synthetic: SyntheticConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            date_column: true,
            mode: SyntheticMode::Correlated,
            length: 2048,
            train_frac: 0.6,
            val_frac: 0.2,
            context_len: 96,
            horizon: 24,
            stride: 4,
            scaler: ScalerKind::Standard,
            revin: true,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecasterConfig {
    pub kind: ForecasterKind,
    /// JSON weights, for `kind = "linear-fixed"`.
    pub path: Option<PathBuf>,
    pub mlp_hidden: usize,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        Self { kind: ForecasterKind::LinearRandom, path: None, mlp_hidden: DEFAULT_MLP_HIDDEN }
    }
}

/// Optimizer settings plus the run seed and fold count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub seed: u64,
    pub k_folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: ScheduleKind,
    pub adam: AdamConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self { seed: 0, k_folds: 3, epochs: t.epochs, batch_size: t.batch_size, lr: t.lr, schedule: t.schedule, adam: t.adam }
    }
}

impl TrainingSection {
    pub fn optim(&self) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            schedule: self.schedule.clone(),
            adam: self.adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Monte-Carlo samples per window for probabilistic evaluation.
    pub s_samples: usize,
    /// Record wall time in the run record (makes it non-reproducible).
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs"), s_samples: 100, timing: false }
    }
}

/// Grids for the sweep commands and for k-fold selection in `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub d_latent: Vec<usize>,
    pub beta: Vec<f64>,
    pub log_sigma2: Vec<f64>,
    pub include_auto: bool,
    /// Learning rates tried by k-fold selection.
    pub lr: Vec<f64>,
    /// Run k-fold grid selection over `lr` before training.
    pub select: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            d_latent: Vec::new(),
            beta: vec![0.0, 0.5, 1.0, 4.0],
            log_sigma2: vec![-2.0, -1.0, 0.0, 1.0],
            include_auto: true,
            lr: vec![1e-3, 3e-3, 1e-2],
            select: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub forecaster: ForecasterConfig,
    pub adapter: AdapterConfig,
    pub training: TrainingSection,
    pub output: OutputConfig,
    pub search: SearchConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, ignoring where and how outputs
    /// are written.
    pub fn hash(&self) -> CliResult<String> {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        c.output.timing = false;
        Ok(hex::encode(Sha256::digest(c.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.dataset;
        if d.context_len == 0 || d.horizon == 0 || d.stride == 0 {
            return Err(CliError::Config("dataset.context_len, horizon and stride must be >= 1".into()));
        }
        if d.source == DataSource::Csv && d.path.is_none() {
            return Err(CliError::Config("dataset.path is required when source = \"csv\"".into()));
        }
        if self.forecaster.kind == ForecasterKind::LinearFixed && self.forecaster.path.is_none() {
            return Err(CliError::Config("forecaster.path is required when kind = \"linear-fixed\"".into()));
        }
        if self.output.s_samples == 0 {
            return Err(CliError::Config("output.s_samples must be >= 1".into()));
        }
        if self.training.k_folds < 2 {
            return Err(CliError::Config("training.k_folds must be >= 2".into()));
        }
        Ok(())
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Every configuration key with its default, for `--help`.
pub const CONFIG_HELP: &str = "\
Config file (TOML). All keys are optional; unknown keys are rejected.

[dataset]     source = \"synthetic\" | \"csv\", path, date_column = true,
              mode = \"correlated\" | \"uncorrelated\", length = 2048,
              train_frac = 0.6, val_frac = 0.2, context_len = 96, horizon = 24,
              stride = 4, scaler = \"standard\" | \"minmax\" | \"none\", revin = true
[dataset.synthetic]
              n_bases = 5, freq_min = 0.00390625, freq_max = 0.0625,
              amp_min = 0.5, amp_max = 2.0, base_noise = 0.05, n_mixed = 8,
              mixed_noise = [0.1, 0.2, 0.5], mix_min = -1.0, mix_max = 1.0,
              shift = 0.0, shift_start = 0.8
[forecaster]  kind = \"linear-random\" | \"linear-fixed\" | \"mlp-random\", path,
              mlp_hidden = 64
[adapter]     kind = \"linear_ae\" (identity, pca, closed_form_linear, linear_ae,
              dropout_linear_ae, linear_enc_only, linear_dec_only, linear_vae,
              deep_vae), d_latent, beta = 0.5, sigma2 = 1.0 | \"auto\",
              dropout_p = 0.1, hidden = 128, layers = 2, lambda = 1e-4
[training]    seed = 0, k_folds = 3, epochs = 30, batch_size = 32, lr = 0.001
[training.schedule]
              kind = \"reduce-on-plateau\" (patience = 5, factor = 0.5,
              min_lr = 1e-5) | \"one-cycle\" (total_epochs, pct_start = 0.3,
              peak_factor = 1.0, div_factor = 25, final_div_factor = 1e4)
              | \"constant\"
[training.adam]
              beta1 = 0.9, beta2 = 0.999, eps = 1e-8
[output]      dir = \"runs\", s_samples = 100, timing = false
[search]      d_latent = [], beta = [0, 0.5, 1, 4], log_sigma2 = [-2, -1, 0, 1],
              include_auto = true, lr = [0.001, 0.003, 0.01], select = false";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn non_default_round_trips() {
        let text = r#"
            [dataset]
            mode = "uncorrelated"
            stride = 8
            [dataset.synthetic]
            amp_min = 0.02
            [adapter]
            kind = "deep_vae"
            d_latent = 3
            sigma2 = "auto"
            [training]
            seed = 9
            epochs = 4
            [training.schedule]
            kind = "one-cycle"
            total_epochs = 4
            [search]
            d_latent = [1, 2]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.training.epochs, 4);
        assert_eq!(cfg.adapter.d_latent, Some(3));
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["[dataset]\nlenght = 3", "[bogus]\n", "[training]\nepoch = 1", "top = 1"] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{text}: {err}");
            assert!(!err.to_string().contains('\n'));
        }
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::from_toml_str("[dataset]\nsource = \"csv\"").is_err());
        assert!(ExperimentConfig::from_toml_str("[output]\ns_samples = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[training]\nk_folds = 1").is_err());
    }
}
