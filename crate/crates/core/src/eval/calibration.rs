use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adapters::{quantile_sorted, ForecastDistribution};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Fewest samples per distribution accepted for calibration.
pub const MIN_SAMPLES: usize = 20;

/// `0.05, 0.15, …, 0.95`.
pub fn default_levels() -> Vec<f64> {
    (0..10).map(|k| 0.05 + 0.1 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub levels: Vec<f64>,
    /// Fraction of all cells with `target ≤ quantile(level)`.
    pub coverage: Vec<f64>,
    /// `per_step[k][h]`: coverage at level `k` restricted to horizon step `h`.
    pub per_step: Vec<Vec<f64>>,
    /// Mean over levels of `|coverage − level|`.
    pub ece: f64,
    pub n_cells: usize,
}

pub fn empirical_coverage(dists: &[ForecastDistribution], targets: &[Matrix], levels: &[f64]) -> Result<ReliabilityTable> {
    if dists.len() != targets.len() || dists.is_empty() {
        return Err(Error::InvalidArgument(format!("{} distributions for {} targets", dists.len(), targets.len())));
    }
    if levels.is_empty() || levels.iter().any(|q| !(*q > 0.0 && *q < 1.0)) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("quantile levels must be strictly increasing in (0, 1)".into()));
    }
    let (h, d) = targets[0].shape();
    let mut hits = vec![vec![0usize; h]; levels.len()];
    for (dist, target) in dists.iter().zip(targets) {
        if dist.n_samples() < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "calibration needs at least {MIN_SAMPLES} samples per distribution, got {}",
                dist.n_samples()
            )));
        }
        if dist.shape() != target.shape() || target.shape() != (h, d) {
            return Err(Error::mismatch("empirical_coverage", dist.shape(), target.shape()));
        }
        for i in 0..h {
            for j in 0..d {
                let sorted = dist.sorted_cell(i, j);
                for (k, q) in levels.iter().enumerate() {
                    if target[(i, j)] <= quantile_sorted(&sorted, *q) {
                        hits[k][i] += 1;
                    }
                }
            }
        }
    }
    let per_step_cells = (dists.len() * d) as f64;
    let n_cells = dists.len() * h * d;
    let per_step: Vec<Vec<f64>> = hits.iter().map(|row| row.iter().map(|c| *c as f64 / per_step_cells).collect()).collect();
    let coverage: Vec<f64> = hits.iter().map(|row| row.iter().sum::<usize>() as f64 / n_cells as f64).collect();
    let ece = coverage.iter().zip(levels).map(|(c, q)| (c - q).abs()).sum::<f64>() / levels.len() as f64;
    Ok(ReliabilityTable { levels: levels.to_vec(), coverage, per_step, ece, n_cells })
}

impl ReliabilityTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `level,step,coverage`; step `all` holds the pooled coverage.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["level", "step", "coverage"])?;
        for (k, q) in self.levels.iter().enumerate() {
            w.write_record([&q.to_string(), "all", &self.coverage[k].to_string()])?;
            for (i, c) in self.per_step[k].iter().enumerate() {
                w.write_record([&q.to_string(), &i.to_string(), &c.to_string()])?;
            }
        }
        w.write_record(["ece", "all", &self.ece.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn gaussian_case(rng: &mut Rng, windows: usize, sample_std: f64) -> (Vec<ForecastDistribution>, Vec<Matrix>) {
        let mut dists = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..windows {
            let samples = (0..50).map(|_| rng.normal_matrix(10, 2).scale(sample_std)).collect();
            dists.push(ForecastDistribution::new(samples).unwrap());
            targets.push(rng.normal_matrix(10, 2));
        }
        (dists, targets)
    }

    #[test]
    fn calibrated_and_overconfident() {
        let mut rng = Rng::new(8);
        let (d, t) = gaussian_case(&mut rng, 500, 1.0);
        let table = empirical_coverage(&d, &t, &default_levels()).unwrap();
        assert!(table.n_cells >= 10_000);
        assert!(table.ece < 0.02, "ece {}", table.ece);
        assert!(table.coverage.windows(2).all(|w| w[0] <= w[1]));
        let (d, t) = gaussian_case(&mut rng, 500, 0.25);
        let table = empirical_coverage(&d, &t, &default_levels()).unwrap();
        assert!(table.ece > 0.10);
        assert!(table.coverage[9] < 0.9);
    }

    #[test]
    fn samples_below_targets() {
        let dists = vec![ForecastDistribution::new(vec![Matrix::zeros(2, 1); 20]).unwrap()];
        let targets = vec![Matrix::filled(2, 1, 1.0)];
        let levels = default_levels();
        let table = empirical_coverage(&dists, &targets, &levels).unwrap();
        assert!(table.coverage.iter().all(|c| *c == 0.0));
        let mean_q = levels.iter().sum::<f64>() / levels.len() as f64;
        assert!((table.ece - mean_q).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let dists = vec![ForecastDistribution::new(vec![Matrix::zeros(1, 1); 19]).unwrap()];
        assert!(empirical_coverage(&dists, &[Matrix::zeros(1, 1)], &[0.5]).is_err());
        let dists = vec![ForecastDistribution::new(vec![Matrix::zeros(1, 1); 20]).unwrap()];
        assert!(empirical_coverage(&dists, &[Matrix::zeros(1, 1)], &[0.5, 0.4]).is_err());
    }
}
