//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use adapts_core::adapters::{load_checkpoint, save_checkpoint, AdapterKind};
use adapts_core::data::{write_csv, SyntheticMode};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, CONFIG_HELP};
use crate::error::{CliError, CliResult};
use crate::latent::{export_latent, export_raw, split_gap, GapSummary};
use crate::linear::{run_linear_experiment, trial_csv_rows, LinearExperimentConfig, TRIAL_HEADER};
use crate::pipeline::{evaluate, load_dataset, setup, train, Streams};
use crate::record::{write_csv_rows, write_file, write_loss_curve, write_metrics, RunRecord};
use crate::sweeps::{sweep_beta_sigma, sweep_components};

#[derive(Debug, Parser)]
#[command(name = "adapts", version, about = "Feature-space adapters around frozen forecasters", after_long_help = CONFIG_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `training.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Record wall time in the run record.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to CSV.
    SynthGen {
        #[arg(long)]
        mode: Option<SyntheticMode>,
        #[arg(long)]
        length: Option<usize>,
    },
    /// Identity vs. PCA vs. closed-form adapters around random linear forecasters.
    LinearExperiment {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value = "uncorrelated")]
        mode: SyntheticMode,
        /// PCA width (default: number of base signals).
        #[arg(long)]
        pca_components: Option<usize>,
    },
    /// Train an adapter and evaluate it on the test split.
    Train {
        #[arg(long)]
        adapter: Option<AdapterKind>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        d_latent: Option<usize>,
    },
    /// Evaluate a checkpoint on the test split of the configured dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Test MSE as a function of the latent width.
    SweepComponents {
        /// Comma-separated widths (default: `search.d_latent`, else 1..=D).
        #[arg(long, value_delimiter = ',')]
        d_latent: Vec<usize>,
    },
    /// Grid of VAE β and log σ², including the learned-variance column.
    SweepBetaSigma {
        #[arg(long, value_delimiter = ',')]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        log_sigma2: Vec<f64>,
    },
    /// 2-D PCA projection of latent codes for train and test windows.
    ExportLatent {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SynthGen { .. } => "synth-gen",
            Command::LinearExperiment { .. } => "linear-experiment",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::SweepComponents { .. } => "sweep-components",
            Command::SweepBetaSigma { .. } => "sweep-beta-sigma",
            Command::ExportLatent { .. } => "export-latent",
        }
    }
}

/// Config file plus command-line overrides.
pub fn resolve_config(g: &GlobalArgs, cmd: &Command) -> CliResult<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.training.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output.dir = o.clone();
    }
    if g.timing {
        cfg.output.timing = true;
    }
    match cmd {
        Command::SynthGen { mode, length } => {
            if let Some(m) = mode {
                cfg.dataset.mode = *m;
            }
            if let Some(l) = length {
                cfg.dataset.length = *l;
            }
        }
        Command::Train { adapter, epochs, d_latent } => {
            if let Some(k) = adapter {
                cfg.adapter.kind = *k;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = *e;
            }
            if d_latent.is_some() {
                cfg.adapter.d_latent = *d_latent;
            }
        }
        Command::Evaluate { samples: Some(s), .. } => cfg.output.s_samples = *s,
        Command::SweepComponents { d_latent } if !d_latent.is_empty() => cfg.search.d_latent = d_latent.clone(),
        Command::SweepBetaSigma { beta, log_sigma2 } => {
            if !beta.is_empty() {
                cfg.search.beta = beta.clone();
            }
            if !log_sigma2.is_empty() {
                cfg.search.log_sigma2 = log_sigma2.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli.global, &cli.command)?;
    let start = Instant::now();
    let dir = cfg.output.dir.clone();
    let mut record = RunRecord::new(cli.command.name(), &cfg)?;
    match &cli.command {
        Command::SynthGen { .. } => synth_gen(&cfg, &dir)?,
        Command::LinearExperiment { trials, mode, pca_components } => {
            let mut lc = LinearExperimentConfig::new(*trials, *mode, cfg.training.seed);
            lc.pca_components = *pca_components;
            linear_experiment(&lc, &dir)?
        }
        Command::Train { .. } => cmd_train(&cfg, &dir, &mut record)?,
        Command::Evaluate { checkpoint, .. } => cmd_evaluate(&cfg, checkpoint, &dir, &mut record)?,
        Command::SweepComponents { .. } => cmd_sweep_components(&cfg, &dir)?,
        Command::SweepBetaSigma { .. } => cmd_sweep_beta_sigma(&cfg, &dir)?,
        Command::ExportLatent { checkpoint } => cmd_export_latent(&cfg, checkpoint, &dir)?,
    }
    if cfg.output.timing {
        record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    record.write(&dir)
}

fn synth_gen(cfg: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    let mut streams = Streams::new(cfg.training.seed);
    let ds = load_dataset(cfg, &mut streams.data)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = match cfg.dataset.mode {
        SyntheticMode::Uncorrelated => "synthetic_uncorrelated.csv",
        SyntheticMode::Correlated => "synthetic_correlated.csv",
    };
    write_csv(&ds, &dir.join(name))?;
    println!("wrote {} ({} steps, {} channels)", dir.join(name).display(), ds.len(), ds.n_channels());
    Ok(())
}

fn linear_experiment(lc: &LinearExperimentConfig, dir: &Path) -> CliResult<()> {
    let (rows, summary) = run_linear_experiment(lc)?;
    write_csv_rows(&dir.join("linear_experiment.csv"), &TRIAL_HEADER, &trial_csv_rows(&rows, &summary))?;
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_file(&dir.join("linear_summary.json"), text.as_bytes())?;
    println!(
        "median mse: identity {:.6e}, pca {:.6e}, closed form {:.6e} (ordering {})",
        summary.median_identity,
        summary.median_pca,
        summary.median_closed_form,
        if summary.ordering_holds { "holds" } else { "does not hold" }
    );
    if !summary.ordering_holds {
        log::warn!("the expected {:?} ordering did not hold", lc.mode);
    }
    Ok(())
}

fn cmd_train(cfg: &ExperimentConfig, dir: &Path, record: &mut RunRecord) -> CliResult<()> {
    let s = setup(cfg)?;
    let t = train(cfg, &s)?;
    let ad = &t.outcome.adapter;
    let (metrics, reliability) = evaluate(ad, s.fm.as_ref(), &s.prepared.test, cfg.output.s_samples, &s.streams.eval)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    save_checkpoint(&dir.join("adapter.ckpt"), ad, &record.config_hash, &s.fm.checksum())?;
    write_metrics(dir, &metrics, reliability.as_ref())?;
    write_loss_curve(dir, &t.outcome.history)?;
    println!("{} test mse {:.6} mae {:.6}", ad.kind(), metrics.mse, metrics.mae);
    record.fm_checksum = Some(s.fm.checksum());
    record.metrics = Some(metrics);
    record.reliability = reliability;
    record.loss_curves = t.outcome.history.clone();
    record.best_epoch = Some(t.outcome.best_epoch);
    record.selected_lr = t.selected_lr;
    Ok(())
}

fn load_for(cfg: &ExperimentConfig, checkpoint: &Path) -> CliResult<(adapts_core::adapters::Adapter, crate::pipeline::Setup)> {
    let ck = load_checkpoint(checkpoint)?;
    let s = setup(cfg)?;
    let d = s.prepared.dataset.n_channels();
    if ck.adapter.d_in() != d {
        return Err(CliError::Core(adapts_core::Error::Shape(format!(
            "checkpoint expects {} channels, dataset has {d}",
            ck.adapter.d_in()
        ))));
    }
    if ck.fm_checksum != s.fm.checksum() {
        return Err(CliError::Core(adapts_core::Error::Checkpoint(
            "checkpoint was trained around a different forecaster (checksum mismatch); use the training config and seed".into(),
        )));
    }
    Ok((ck.adapter, s))
}

fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: &Path, dir: &Path, record: &mut RunRecord) -> CliResult<()> {
    let (ad, s) = load_for(cfg, checkpoint)?;
    let (metrics, reliability) = evaluate(&ad, s.fm.as_ref(), &s.prepared.test, cfg.output.s_samples, &s.streams.eval)?;
    write_metrics(dir, &metrics, reliability.as_ref())?;
    println!("{} test mse {:.6} mae {:.6}", ad.kind(), metrics.mse, metrics.mae);
    record.fm_checksum = Some(s.fm.checksum());
    record.metrics = Some(metrics);
    record.reliability = reliability;
    Ok(())
}

fn cmd_sweep_components(cfg: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    let s = setup(cfg)?;
    let rows = sweep_components(cfg, &s, &cfg.search.d_latent)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.d_latent.to_string(), r.mse.to_string(), r.mae.to_string(), r.identity_mse.to_string()])
        .collect();
    write_csv_rows(&dir.join("components.csv"), &["d_latent", "mse", "mae", "identity_mse"], &table)?;
    println!("wrote {} rows to {}", rows.len(), dir.join("components.csv").display());
    Ok(())
}

fn cmd_sweep_beta_sigma(cfg: &ExperimentConfig, dir: &Path) -> CliResult<()> {
    let s = setup(cfg)?;
    let rows = sweep_beta_sigma(cfg, &s, &cfg.search.beta, &cfg.search.log_sigma2, cfg.search.include_auto)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.beta.to_string(),
                r.sigma_label(),
                r.mse.to_string(),
                r.mae.to_string(),
                r.ece.map_or_else(String::new, |e| e.to_string()),
                r.kl.to_string(),
                r.nll.to_string(),
            ]
        })
        .collect();
    write_csv_rows(&dir.join("beta_sigma.csv"), &["beta", "log_sigma2", "mse", "mae", "ece", "kl", "nll"], &table)?;
    println!("wrote {} rows to {}", rows.len(), dir.join("beta_sigma.csv").display());
    Ok(())
}

fn cmd_export_latent(cfg: &ExperimentConfig, checkpoint: &Path, dir: &Path) -> CliResult<()> {
    let (ad, s) = load_for(cfg, checkpoint)?;
    let rows = export_latent(&ad, &s.prepared)?;
    let table: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.x.to_string(), r.y.to_string(), r.split.clone(), r.window.to_string()]).collect();
    write_csv_rows(&dir.join("latent.csv"), &["x", "y", "split", "window"], &table)?;
    let gaps = GapSummary { latent_gap: split_gap(&rows), raw_gap: split_gap(&export_raw(&s.prepared)?) };
    let mut text = serde_json::to_string_pretty(&gaps)?;
    text.push('\n');
    write_file(&dir.join("latent_summary.json"), text.as_bytes())?;
    println!(
        "wrote {} rows to {} (train/test gap: latent {:.4}, raw {:.4})",
        rows.len(),
        dir.join("latent.csv").display(),
        gaps.latent_gap,
        gaps.raw_gap
    );
    Ok(())
}
