use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// `S` sampled forecast paths for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDistribution {
    samples: Vec<Matrix>,
}

impl ForecastDistribution {
    pub fn new(samples: Vec<Matrix>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("a forecast distribution needs at least one sample".into()));
        };
        let shape = first.shape();
        if let Some(bad) = samples.iter().find(|s| s.shape() != shape) {
            return Err(Error::mismatch("ForecastDistribution::new", shape, bad.shape()));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Matrix] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.samples[0].shape()
    }

    pub fn mean(&self) -> Matrix {
        let mut acc = self.samples[0].clone();
        for s in &self.samples[1..] {
            acc.add_assign(s).expect("shapes checked at construction");
        }
        acc.scale(1.0 / self.samples.len() as f64)
    }

    /// Unbiased per-cell sample variance (zero when `S = 1`).
    pub fn variance(&self) -> Matrix {
        let s = self.samples.len();
        let (r, c) = self.shape();
        if s < 2 {
            return Matrix::zeros(r, c);
        }
        // Shifted by the first sample, so identical samples give exactly 0.
        let shift = &self.samples[0];
        let mut sum = Matrix::zeros(r, c);
        let mut acc = Matrix::zeros(r, c);
        for m in &self.samples[1..] {
            for (((a, t), v), x0) in acc.as_mut_slice().iter_mut().zip(sum.as_mut_slice()).zip(m.as_slice()).zip(shift.as_slice()) {
                let dv = v - x0;
                *t += dv;
                *a += dv * dv;
            }
        }
        for (a, t) in acc.as_mut_slice().iter_mut().zip(sum.as_slice()) {
            *a = (*a - t * t / s as f64).max(0.0);
        }
        acc.scale(1.0 / (s - 1) as f64)
    }

    /// Sorted samples of one cell.
    pub fn sorted_cell(&self, i: usize, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.samples.iter().map(|m| m[(i, j)]).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Per-cell quantile by linear interpolation between order statistics.
    pub fn quantile(&self, q: f64) -> Result<Matrix> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile level must be in [0, 1], got {q}")));
        }
        let (r, c) = self.shape();
        Ok(Matrix::from_fn(r, c, |i, j| quantile_sorted(&self.sorted_cell(i, j), q)))
    }
}

/// Linear interpolation at position `q · (n − 1)` of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
