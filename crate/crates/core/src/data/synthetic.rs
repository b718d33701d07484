//! Sinusoidal base signals and noisy linear mixtures of them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::{SplitRanges, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticMode {
    /// The base sinusoids themselves, each with i.i.d. noise.
    Uncorrelated,
    /// Random linear combinations of the bases plus channel noise.
    Correlated,
}

impl std::str::FromStr for SyntheticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncorrelated" => Ok(Self::Uncorrelated),
            "correlated" => Ok(Self::Correlated),
            other => Err(Error::InvalidArgument(format!("unknown synthetic mode '{other}' (expected uncorrelated or correlated)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_bases: usize,
    /// Lowest and highest base frequency in cycles per step; intermediate
    /// frequencies are log-spaced.
    pub freq_min: f64,
    pub freq_max: f64,
    pub amp_min: f64,
    pub amp_max: f64,
    pub base_noise: f64,
    pub n_mixed: usize,
    /// Noise levels cycled over the mixed channels.
    pub mixed_noise: Vec<f64>,
    pub mix_min: f64,
    pub mix_max: f64,
    /// Level shift added to every channel from `shift_start` (a fraction of
    /// the series) onward. Zero disables it.
    pub shift: f64,
    pub shift_start: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_bases: 5,
            freq_min: 1.0 / 256.0,
            freq_max: 1.0 / 16.0,
            amp_min: 0.5,
            amp_max: 2.0,
            base_noise: 0.05,
            n_mixed: 8,
            mixed_noise: vec![0.1, 0.2, 0.5],
            mix_min: -1.0,
            mix_max: 1.0,
            shift: 0.0,
            shift_start: 0.8,
        }
    }
}

impl SyntheticConfig {
    /// Low-amplitude bases used by the linear-adapter experiment. With unit
    /// amplitudes the forecaster residual is dominated by components the
    /// bias term cannot reach, and the closed-form adapter gains little.
    pub fn linear_experiment() -> Self {
        Self { amp_min: 0.02, amp_max: 0.1, ..Self::default() }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_bases;
        if n == 1 {
            return vec![self.freq_min];
        }
        let (lo, hi) = (self.freq_min.log2(), self.freq_max.log2());
        (0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp2()).collect()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.n_bases >= 1
            && self.freq_min > 0.0
            && self.freq_max >= self.freq_min
            && self.amp_max >= self.amp_min
            && self.base_noise >= 0.0
            && self.n_mixed >= 1
            && !self.mixed_noise.is_empty()
            && self.mixed_noise.iter().all(|s| *s >= 0.0)
            && self.mix_max >= self.mix_min
            && (0.0..=1.0).contains(&self.shift_start);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid synthetic config: {self:?}")))
        }
    }
}

/// Generates with [`SyntheticConfig::default`].
pub fn generate_synthetic(rng: &mut Rng, mode: SyntheticMode, t: usize) -> Result<TimeSeriesDataset> {
    generate_synthetic_with(rng, mode, t, &SyntheticConfig::default())
}

pub fn generate_synthetic_with(rng: &mut Rng, mode: SyntheticMode, t: usize, cfg: &SyntheticConfig) -> Result<TimeSeriesDataset> {
    if t < 1024 {
        return Err(Error::InvalidArgument(format!("synthetic series needs T >= 1024, got {t}")));
    }
    cfg.validate()?;
    let k = cfg.n_bases;
    let freqs = cfg.frequencies();
    let amps: Vec<f64> = (0..k).map(|_| rng.uniform_range(cfg.amp_min, cfg.amp_max)).collect();
    let phases: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
    let mut bases = Matrix::from_fn(t, k, |i, j| amps[j] * (2.0 * PI * freqs[j] * i as f64 + phases[j]).sin());
    for v in bases.as_mut_slice() {
        *v += cfg.base_noise * rng.normal();
    }

    let (mut values, names) = match mode {
        SyntheticMode::Uncorrelated => (bases, (0..k).map(|j| format!("base_{j}")).collect::<Vec<_>>()),
        SyntheticMode::Correlated => {
            let m = cfg.n_mixed;
            let mix = rng.uniform_matrix(k, m, cfg.mix_min, cfg.mix_max);
            let mut mixed = bases.matmul(&mix)?;
            for i in 0..t {
                for (j, v) in mixed.row_mut(i).iter_mut().enumerate() {
                    *v += cfg.mixed_noise[j % cfg.mixed_noise.len()] * rng.normal();
                }
            }
            (mixed, (0..m).map(|j| format!("mix_{j}")).collect())
        }
    };
    if cfg.shift != 0.0 {
        let start = (t as f64 * cfg.shift_start).floor() as usize;
        for i in start..t {
            values.row_mut(i).iter_mut().for_each(|v| *v += cfg.shift);
        }
    }
    let split = SplitRanges::from_fractions(t, 0.6, 0.2)?;
    TimeSeriesDataset::new(values, names, "1 step", split)
}
