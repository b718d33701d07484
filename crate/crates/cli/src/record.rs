//! Run records and the small CSV writers shared by the commands.

use std::path::Path;

use adapts_core::adapters::EpochRecord;
use adapts_core::eval::{MetricsReport, ReliabilityTable};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// What one command run produced, with the exact config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub fm_checksum: Option<String>,
    pub metrics: Option<MetricsReport>,
    pub reliability: Option<ReliabilityTable>,
    pub loss_curves: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub selected_lr: Option<f64>,
    /// Only recorded with `--timing`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

impl RunRecord {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> CliResult<Self> {
        Ok(Self {
            command: command.to_string(),
            config_hash: cfg.hash()?,
            seed: cfg.training.seed,
            config: cfg.clone(),
            fm_checksum: None,
            metrics: None,
            reliability: None,
            loss_curves: Vec::new(),
            best_epoch: None,
            selected_lr: None,
            wall_time_s: None,
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(&dir.join("run_record.json"), text.as_bytes())?;
        write_file(&dir.join("config.toml"), self.config.to_toml_string()?.as_bytes())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes rows through a CSV writer into `path`.
pub fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    write_file(path, &buf)
}

pub fn write_metrics(dir: &Path, metrics: &MetricsReport, reliability: Option<&ReliabilityTable>) -> CliResult<()> {
    let mut buf = Vec::new();
    metrics.write_csv(&mut buf)?;
    write_file(&dir.join("metrics.csv"), &buf)?;
    if let Some(r) = reliability {
        let mut buf = Vec::new();
        r.write_csv(&mut buf)?;
        write_file(&dir.join("reliability.csv"), &buf)?;
    }
    Ok(())
}

pub fn write_loss_curve(dir: &Path, history: &[EpochRecord]) -> CliResult<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.lr.to_string(),
                e.train_loss.to_string(),
                e.train_nll.to_string(),
                e.train_kl.to_string(),
                e.val_mse.to_string(),
            ]
        })
        .collect();
    write_csv_rows(&dir.join("loss_curve.csv"), &["epoch", "lr", "train_loss", "train_nll", "train_kl", "val_mse"], &rows)
}
