//! End-to-end behaviour of the `adapts` subcommands on small synthetic runs.

mod common;

use adapts_cli::pipeline::setup;
use adapts_cli::ExperimentConfig;
use adapts_core::eval::metrics_report;
use adapts_core::numkit::{pca_fit, pca_transform};
use adapts_core::Matrix;
use common::*;
use tempfile::TempDir;

fn small(extra: &str) -> String {
    format!("{SMALL}{extra}")
}

#[test]
fn config_errors_are_one_line() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "[dataset]\nlenght = 10\n");
    for args in [
        vec!["train", "--config", s(&bad)],
        vec!["train", "--config", "/nonexistent/adapts.toml"],
        vec!["sweep-beta-sigma", "--config", s(&write_config(tmp.path(), "ae.toml", SMALL))],
    ] {
        let r = adapts(&args);
        assert_eq!(r.code, 1, "{args:?}");
        let lines: Vec<&str> = r.stderr.lines().collect();
        assert_eq!(lines.len(), 1, "{:?}", r.stderr);
        assert!(lines[0].starts_with("error["), "{}", lines[0]);
    }
}

#[test]
fn help_lists_config_keys() {
    let r = adapts_ok(&["--help"]);
    for key in ["[dataset]", "context_len", "[adapter]", "d_latent", "[training]", "k_folds", "[search]", "s_samples"] {
        assert!(r.stdout.contains(key), "{key}");
    }
}

#[test]
fn synth_gen_writes_series() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    adapts_ok(&["synth-gen", "--mode", "uncorrelated", "--length", "1200", "--out", s(&out)]);
    let rows = read_rows(&out.join("synthetic_uncorrelated.csv"));
    assert_eq!(rows.len(), 1200);
    assert_eq!(rows[0].len(), 5 + 1);
    assert!(out.join("run_record.json").exists());
}

#[test]
fn checkpoint_channel_mismatch_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let other = write_config(tmp.path(), "u.toml", &small("mode = \"uncorrelated\"\n"));
    let run = tmp.path().join("run");
    adapts_ok(&["train", "--config", s(&cfg), "--adapter", "identity", "--out", s(&run)]);
    let ck = run.join("adapter.ckpt");
    let r = adapts(&["evaluate", "--config", s(&other), "--checkpoint", s(&ck), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[shape]"), "{}", r.stderr);
    assert!(r.stderr.contains("8 channels") && r.stderr.contains("has 5"), "{}", r.stderr);

    let r = adapts(&["evaluate", "--config", s(&cfg), "--seed", "5", "--checkpoint", s(&ck), "--out", s(&tmp.path().join("f"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error[checkpoint]"), "{}", r.stderr);
}

/// Applies the forecaster to each channel of each test window with per-window
/// standardization written out by hand.
fn raw_forecaster_mse(cfg: &ExperimentConfig) -> f64 {
    let su = setup(cfg).unwrap();
    let p = &su.prepared;
    let (l, h) = (cfg.dataset.context_len, cfg.dataset.horizon);
    let d = p.dataset.n_channels();
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for &start in &p.test.model.starts {
        let mut pred = Matrix::zeros(h, d);
        let mut target = Matrix::zeros(h, d);
        for c in 0..d {
            let ctx: Vec<f64> = (0..l).map(|t| p.dataset.values[(start + t, c)]).collect();
            let mean = ctx.iter().sum::<f64>() / l as f64;
            let std = (ctx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / l as f64).sqrt().max(1e-5);
            let norm: Vec<f64> = ctx.iter().map(|v| (v - mean) / std).collect();
            let f = su.fm.forecast_one(&norm).unwrap();
            for t in 0..h {
                pred[(t, c)] = f[t] * std + mean;
                target[(t, c)] = p.dataset.values[(start + l + t, c)];
            }
        }
        preds.push(pred);
        targets.push(target);
    }
    metrics_report(&preds, &targets).unwrap().mse
}

#[test]
fn identity_evaluate_is_raw_forecaster() {
    let tmp = TempDir::new().unwrap();
    let text = small("");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let run = tmp.path().join("run");
    adapts_ok(&["train", "--config", s(&cfg), "--adapter", "identity", "--out", s(&run)]);
    let ev = tmp.path().join("ev");
    adapts_ok(&["evaluate", "--config", s(&cfg), "--checkpoint", s(&run.join("adapter.ckpt")), "--out", s(&ev)]);
    let expect = raw_forecaster_mse(&ExperimentConfig::from_toml_str(&text).unwrap());
    let got = record_mse(&ev);
    assert!((got - expect).abs() <= 1e-12 * expect, "evaluate {got}, direct {expect}");
    assert_eq!(record_mse(&run), got);
}

#[test]
fn train_and_evaluate_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[adapter]\nkind = \"linear_vae\"\n[training]\nepochs = 5\n[output]\ns_samples = 30\n"));
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        adapts_ok(&["train", "--config", s(&cfg), "--out", s(&dir)]);
        let ev = dir.join("eval");
        adapts_ok(&["evaluate", "--config", s(&cfg), "--checkpoint", s(&dir.join("adapter.ckpt")), "--out", s(&ev)]);
        runs.push(dir);
    }
    for f in ["adapter.ckpt", "metrics.csv", "reliability.csv", "loss_curve.csv", "eval/metrics.csv", "eval/reliability.csv"] {
        assert_eq!(std::fs::read(runs[0].join(f)).unwrap(), std::fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let (a, b) = (read_json(&runs[0].join("run_record.json")), read_json(&runs[1].join("run_record.json")));
    assert_eq!(a["config_hash"], b["config_hash"]);
    assert_eq!(a["metrics"], b["metrics"]);
    assert_eq!(a["reliability"], b["reliability"]);
}

#[test]
fn linear_ae_beats_identity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[training]\nlr = 0.01\n"));
    let (id, ae) = (tmp.path().join("id"), tmp.path().join("ae"));
    adapts_ok(&["train", "--config", s(&cfg), "--adapter", "identity", "--out", s(&id)]);
    adapts_ok(&["train", "--config", s(&cfg), "--adapter", "linear_ae", "--out", s(&ae)]);
    let (mi, ma) = (record_mse(&id), record_mse(&ae));
    assert!(ma < mi, "linear_ae {ma}, identity {mi}");
}

#[test]
fn component_sweep_has_one_row_per_width() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[training]\nepochs = 2\n"));
    let out = tmp.path().join("out");
    adapts_ok(&["sweep-components", "--config", s(&cfg), "--out", s(&out)]);
    let rows = read_rows(&out.join("components.csv"));
    assert_eq!(rows.len(), 8);
    let widths: Vec<f64> = rows.iter().map(|r| num(r, "d_latent")).collect();
    assert_eq!(widths, (1..=8).map(f64::from).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r["identity_mse"] == rows[0]["identity_mse"]));
}

#[test]
fn full_width_is_no_worse_than_one_after_convergence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[training]\nepochs = 100\nlr = 0.01\n"));
    let out = tmp.path().join("out");
    adapts_ok(&["sweep-components", "--config", s(&cfg), "--d-latent", "1,8", "--out", s(&out)]);
    let rows = read_rows(&out.join("components.csv"));
    let (one, full) = (num(&rows[0], "mse"), num(&rows[1], "mse"));
    assert!(full <= one, "D'=8 {full}, D'=1 {one}");
}

#[test]
fn pca_at_rank_matches_full_width() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[adapter]\nkind = \"pca\"\n"));
    let out = tmp.path().join("out");
    adapts_ok(&["sweep-components", "--config", s(&cfg), "--d-latent", "5,8", "--out", s(&out)]);
    let rows = read_rows(&out.join("components.csv"));
    let (five, eight) = (num(&rows[0], "mse"), num(&rows[1], "mse"));
    assert!((five - eight).abs() <= 0.05 * eight, "D'=5 {five}, D'=8 {eight}");
}

#[test]
fn beta_sigma_grid_cardinality() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[adapter]\nkind = \"linear_vae\"\n[training]\nepochs = 2\n[output]\ns_samples = 20\n"));
    let out = tmp.path().join("out");
    adapts_ok(&["sweep-beta-sigma", "--config", s(&cfg), "--log-sigma2", "-2,-1,0,1", "--out", s(&out)]);
    let rows = read_rows(&out.join("beta_sigma.csv"));
    assert_eq!(rows.len(), 16 + 4);
    assert_eq!(rows.iter().filter(|r| r["log_sigma2"] == "auto").count(), 4);
    for r in &rows {
        assert!(num(r, "mse").is_finite() && num(r, "ece").is_finite(), "{r:?}");
    }
}

#[test]
fn stronger_kl_weight_shrinks_kl() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("[adapter]\nkind = \"linear_vae\"\n[training]\nlr = 0.01\n"));
    let out = tmp.path().join("out");
    adapts_ok(&["sweep-beta-sigma", "--config", s(&cfg), "--beta", "0,4", "--log-sigma2", "0", "--out", s(&out)]);
    let rows = read_rows(&out.join("beta_sigma.csv"));
    let kl = |beta: &str, sigma: &str| {
        num(rows.iter().find(|r| r["beta"] == beta && r["log_sigma2"] == sigma).unwrap(), "kl")
    };
    assert!(kl("0", "0") > kl("4", "0"), "{rows:?}");
    assert!(kl("0", "auto") > kl("4", "auto"), "{rows:?}");
}

#[test]
fn identity_latent_export_is_pca_of_windows() {
    let tmp = TempDir::new().unwrap();
    let text = small("");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let run = tmp.path().join("run");
    adapts_ok(&["train", "--config", s(&cfg), "--adapter", "identity", "--out", s(&run)]);
    let out = tmp.path().join("lat");
    adapts_ok(&["export-latent", "--config", s(&cfg), "--checkpoint", s(&run.join("adapter.ckpt")), "--out", s(&out)]);
    let rows = read_rows(&out.join("latent.csv"));

    let su = setup(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
    let p = &su.prepared;
    assert_eq!(rows.len(), p.train.len() + p.test.len());
    let last = |cs: &[Matrix]| Matrix::vstack(&cs.iter().map(|c| c.slice_rows(c.rows() - 1, c.rows())).collect::<Vec<_>>()).unwrap();
    let (tr, te) = (last(&p.train.model.contexts), last(&p.test.model.contexts));
    let model = pca_fit(&Matrix::vstack(&[tr.clone(), te.clone()]).unwrap(), 2).unwrap();
    let expect = Matrix::vstack(&[pca_transform(&model, &tr).unwrap(), pca_transform(&model, &te).unwrap()]).unwrap();
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["split"], if i < p.train.len() { "train" } else { "test" });
        assert!((num(r, "x") - expect[(i, 0)]).abs() < 1e-12 && (num(r, "y") - expect[(i, 1)]).abs() < 1e-12, "row {i}");
    }
}

#[test]
fn deep_vae_latent_closes_split_gap_under_shift() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &small("[dataset.synthetic]\nshift = 2.0\n[adapter]\nkind = \"deep_vae\"\n[training]\nlr = 0.003\n"),
    );
    let run = tmp.path().join("run");
    adapts_ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let out = tmp.path().join("lat");
    adapts_ok(&["export-latent", "--config", s(&cfg), "--checkpoint", s(&run.join("adapter.ckpt")), "--out", s(&out)]);
    let gaps = read_json(&out.join("latent_summary.json"));
    let (latent, raw) = (gaps["latent_gap"].as_f64().unwrap(), gaps["raw_gap"].as_f64().unwrap());
    assert!(latent < raw, "latent gap {latent}, raw gap {raw}");
}

#[test]
fn single_trial_linear_experiment_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        adapts_ok(&["linear-experiment", "--trials", "1", "--mode", "correlated", "--out", s(dir)]);
    }
    for f in ["linear_experiment.csv", "linear_summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(read_rows(&a.join("linear_experiment.csv")).len(), 2);
}
