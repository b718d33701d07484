use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

fn check(pred: &Matrix, target: &Matrix, op: &'static str) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::mismatch(op, pred.shape(), target.shape()));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument(format!("{op} of empty matrices")));
    }
    Ok(())
}

/// Mean squared error per cell.
pub fn mse(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check(pred, target, "mse")?;
    let s: f64 = pred.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(s / pred.len() as f64)
}

/// Mean absolute error per cell.
pub fn mae(pred: &Matrix, target: &Matrix) -> Result<f64> {
    check(pred, target, "mae")?;
    let s: f64 = pred.as_slice().iter().zip(target.as_slice()).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    /// One entry per horizon step, averaged over windows and channels.
    pub per_step_mse: Vec<f64>,
    pub per_step_mae: Vec<f64>,
    pub n_windows: usize,
}

/// Aggregates over equally shaped `H × D` windows.
pub fn metrics_report(preds: &[Matrix], targets: &[Matrix]) -> Result<MetricsReport> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::InvalidArgument(format!("{} predictions for {} targets", preds.len(), targets.len())));
    }
    let (h, d) = targets[0].shape();
    let mut step_se = vec![0.0; h];
    let mut step_ae = vec![0.0; h];
    for (p, t) in preds.iter().zip(targets) {
        check(p, t, "metrics_report")?;
        if t.shape() != (h, d) {
            return Err(Error::mismatch("metrics_report", (h, d), t.shape()));
        }
        for i in 0..h {
            for (a, b) in p.row(i).iter().zip(t.row(i)) {
                step_se[i] += (a - b).powi(2);
                step_ae[i] += (a - b).abs();
            }
        }
    }
    let per_cell = (preds.len() * d) as f64;
    let per_step_mse: Vec<f64> = step_se.iter().map(|s| s / per_cell).collect();
    let per_step_mae: Vec<f64> = step_ae.iter().map(|s| s / per_cell).collect();
    Ok(MetricsReport {
        mse: per_step_mse.iter().sum::<f64>() / h as f64,
        mae: per_step_mae.iter().sum::<f64>() / h as f64,
        per_step_mse,
        per_step_mae,
        n_windows: preds.len(),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `metric,step,value`; step `all` holds the aggregate.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "step", "value"])?;
        w.write_record(["mse", "all", &self.mse.to_string()])?;
        w.write_record(["mae", "all", &self.mae.to_string()])?;
        for (i, v) in self.per_step_mse.iter().enumerate() {
            w.write_record(["mse", &i.to_string(), &v.to_string()])?;
        }
        for (i, v) in self.per_step_mae.iter().enumerate() {
            w.write_record(["mae", &i.to_string(), &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let t = Matrix::zeros(2, 2);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        let ones = Matrix::filled(2, 2, 1.0);
        assert_eq!((mse(&ones, &t).unwrap(), mae(&ones, &t).unwrap()), (1.0, 1.0));
        let p = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(mse(&p, &t).unwrap(), 7.5);
        assert!(mse(&p, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn report_matches_mean_of_windows() {
        let preds = vec![Matrix::from_rows(&[[1.0], [2.0]]), Matrix::from_rows(&[[0.0], [-1.0]])];
        let targets = vec![Matrix::zeros(2, 1), Matrix::zeros(2, 1)];
        let r = metrics_report(&preds, &targets).unwrap();
        let mean: f64 = preds.iter().zip(&targets).map(|(p, t)| mse(p, t).unwrap()).sum::<f64>() / 2.0;
        assert!((r.mse - mean).abs() < 1e-15);
        assert_eq!(r.per_step_mse, vec![0.5, 2.5]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("metric,step,value\nmse,all,1.5\n"));
    }
}
