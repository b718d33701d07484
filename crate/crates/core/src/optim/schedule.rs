use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_pct_start() -> f64 {
    0.3
}
fn default_peak_factor() -> f64 {
    1.0
}
fn default_div_factor() -> f64 {
    25.0
}
fn default_final_div_factor() -> f64 {
    1e4
}
fn default_patience() -> usize {
    5
}
fn default_factor() -> f64 {
    0.5
}
fn default_min_lr() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleKind {
    Constant,
    /// Cosine warm-up from `peak / div_factor` to `peak = base · peak_factor`
    /// over the first `pct_start` of training, then cosine decay to
    /// `peak / (div_factor · final_div_factor)`.
    OneCycle {
        total_epochs: usize,
        #[serde(default = "default_pct_start")]
        pct_start: f64,
        #[serde(default = "default_peak_factor")]
        peak_factor: f64,
        #[serde(default = "default_div_factor")]
        div_factor: f64,
        #[serde(default = "default_final_div_factor")]
        final_div_factor: f64,
    },
    /// Multiplies the rate by `factor` once the validation loss has failed to
    /// improve for more than `patience` consecutive epochs.
    ReduceOnPlateau {
        #[serde(default = "default_patience")]
        patience: usize,
        #[serde(default = "default_factor")]
        factor: f64,
        #[serde(default = "default_min_lr")]
        min_lr: f64,
    },
}

impl Default for ScheduleKind {
    fn default() -> Self {
        ScheduleKind::ReduceOnPlateau { patience: default_patience(), factor: default_factor(), min_lr: default_min_lr() }
    }
}

/// A learning-rate schedule together with its running state.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    current: f64,
    best: f64,
    bad_epochs: usize,
}

impl LrSchedule {
    pub fn new(kind: ScheduleKind, base_lr: f64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("base_lr must be positive, got {base_lr}")));
        }
        match &kind {
            ScheduleKind::Constant => {}
            ScheduleKind::OneCycle { total_epochs, pct_start, peak_factor, div_factor, final_div_factor } => {
                if *total_epochs == 0 {
                    return Err(Error::InvalidArgument("one-cycle total_epochs must be >= 1".into()));
                }
                if !(0.0..=1.0).contains(pct_start) {
                    return Err(Error::InvalidArgument(format!("pct_start must be in [0, 1], got {pct_start}")));
                }
                if !(*peak_factor > 0.0 && *peak_factor <= 10.0) {
                    return Err(Error::InvalidArgument(format!("peak_factor must be in (0, 10], got {peak_factor}")));
                }
                if !(*div_factor >= 1.0 && *final_div_factor >= 1.0) {
                    return Err(Error::InvalidArgument("one-cycle div factors must be >= 1".into()));
                }
            }
            ScheduleKind::ReduceOnPlateau { factor, min_lr, .. } => {
                if !(*factor > 0.0 && *factor < 1.0) {
                    return Err(Error::InvalidArgument(format!("plateau factor must be in (0, 1), got {factor}")));
                }
                if !(*min_lr > 0.0 && *min_lr <= base_lr) {
                    return Err(Error::InvalidArgument(format!("min_lr must be in (0, base_lr], got {min_lr}")));
                }
            }
        }
        Ok(Self { kind, base_lr, current: base_lr, best: f64::INFINITY, bad_epochs: 0 })
    }

    pub fn constant(base_lr: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant, base_lr)
    }

    /// Rate to use at the start of training.
    pub fn initial_lr(&self) -> f64 {
        match self.kind {
            ScheduleKind::OneCycle { .. } => self.one_cycle(0),
            _ => self.base_lr,
        }
    }

    /// Top of the one-cycle ramp, or `base_lr` for the other kinds.
    pub fn peak_lr(&self) -> f64 {
        match self.kind {
            ScheduleKind::OneCycle { peak_factor, .. } => self.base_lr * peak_factor,
            _ => self.base_lr,
        }
    }

    /// Epoch at which one-cycle reaches its peak.
    pub fn peak_epoch(&self) -> usize {
        match self.kind {
            ScheduleKind::OneCycle { total_epochs, pct_start, .. } => ((total_epochs - 1) as f64 * pct_start).round() as usize,
            _ => 0,
        }
    }

    fn one_cycle(&self, epoch: usize) -> f64 {
        let ScheduleKind::OneCycle { total_epochs, div_factor, final_div_factor, .. } = self.kind else {
            return self.base_lr;
        };
        let peak = self.peak_lr();
        let start = peak / div_factor;
        let end = start / final_div_factor;
        let last = total_epochs - 1;
        let e = epoch.min(last);
        let p = self.peak_epoch();
        let cos_interp = |from: f64, to: f64, frac: f64| to + (from - to) * (1.0 + (PI * frac).cos()) / 2.0;
        if e <= p {
            if p == 0 {
                peak
            } else {
                cos_interp(start, peak, e as f64 / p as f64)
            }
        } else {
            cos_interp(peak, end, (e - p) as f64 / (last - p) as f64)
        }
    }
}

/// Advances the schedule. For one-cycle, returns the rate for `epoch`
/// (`val_loss` is ignored). For reduce-on-plateau, records the validation
/// loss of the epoch just finished and returns the rate for the next one.
pub fn schedule_lr(sched: &mut LrSchedule, epoch: usize, val_loss: f64) -> f64 {
    match sched.kind {
        ScheduleKind::Constant => sched.base_lr,
        ScheduleKind::OneCycle { .. } => {
            sched.current = sched.one_cycle(epoch);
            sched.current
        }
        ScheduleKind::ReduceOnPlateau { patience, factor, min_lr } => {
            if val_loss < sched.best {
                sched.best = val_loss;
                sched.bad_epochs = 0;
            } else {
                sched.bad_epochs += 1;
            }
            if sched.bad_epochs > patience {
                sched.current = (sched.current * factor).max(min_lr);
                sched.bad_epochs = 0;
            }
            sched.current
        }
    }
}
