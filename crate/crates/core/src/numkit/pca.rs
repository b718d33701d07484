use serde::{Deserialize, Serialize};

use super::{svd, Matrix};
use crate::error::{Error, Result};

/// A fitted PCA projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `D × D′`, orthonormal columns, each signed so its largest-magnitude
    /// entry is positive.
    pub components: Matrix,
    /// Singular values squared over `n − 1`, nonincreasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.components.rows()
    }

    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn explained_variance_ratio(&self, total_variance: f64) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / total_variance).collect()
    }
}

pub fn pca_fit(data: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pca_fit needs at least 2 rows, got {n}")));
    }
    if n_components == 0 || n_components > d {
        return Err(Error::InvalidArgument(format!("n_components must be in 1..={d}, got {n_components}")));
    }
    let mean = data.column_means();
    let neg_mean: Vec<f64> = mean.iter().map(|m| -m).collect();
    let mut centered = data.add_row_broadcast(&neg_mean)?;
    if n < d {
        // Zero rows leave the right singular vectors unchanged and give the
        // thin SVD a full set of D components.
        centered = Matrix::vstack(&[centered, Matrix::zeros(d - n, d)])?;
    }
    let f = svd(&centered)?;
    let mut components = Matrix::zeros(d, n_components);
    for k in 0..n_components {
        let mut v = f.vt.row(k).to_vec();
        let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.set_column(k, &v);
    }
    let explained_variance = f.s[..n_components].iter().map(|s| s * s / (n - 1) as f64).collect();
    Ok(PcaModel { mean, components, explained_variance })
}

/// Subtracts the mean, then projects onto the components.
pub fn pca_transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.n_features() {
        return Err(Error::mismatch("pca_transform", x.shape(), model.components.shape()));
    }
    let neg: Vec<f64> = model.mean.iter().map(|m| -m).collect();
    x.add_row_broadcast(&neg)?.matmul(&model.components)
}

/// Back-projects, then adds the mean.
pub fn pca_inverse(model: &PcaModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != model.n_components() {
        return Err(Error::mismatch("pca_inverse", z.shape(), model.components.shape()));
    }
    z.matmul_t(&model.components)?.add_row_broadcast(&model.mean)
}

/// Total variance (sum of per-column unbiased variances).
pub fn total_variance(data: &Matrix) -> f64 {
    let n = data.rows();
    let mean = data.column_means();
    let mut total = 0.0;
    for i in 0..n {
        for (v, m) in data.row(i).iter().zip(&mean) {
            total += (v - m).powi(2);
        }
    }
    total / (n.saturating_sub(1)).max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn identical_columns_one_component() {
        let mut rng = Rng::new(1);
        let col: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let data = Matrix::from_fn(50, 2, |i, _| col[i]);
        let model = pca_fit(&data, 1).unwrap();
        let ratio = model.explained_variance[0] / total_variance(&data);
        assert!((ratio - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mean_row_maps_to_zero() {
        let mut rng = Rng::new(2);
        let data = rng.normal_matrix(30, 4);
        let model = pca_fit(&data, 2).unwrap();
        let z = pca_transform(&model, &Matrix::row_vector(&model.mean)).unwrap();
        assert!(z.max_abs() < 1e-12);
    }

    #[test]
    fn full_round_trip() {
        let mut rng = Rng::new(3);
        let data = rng.normal_matrix(40, 5);
        let model = pca_fit(&data, 5).unwrap();
        let back = pca_inverse(&model, &pca_transform(&model, &data).unwrap()).unwrap();
        assert!(back.sub(&data).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn rank_two_round_trip_with_two_components() {
        let mut rng = Rng::new(4);
        let data = rng.normal_matrix(60, 2).matmul(&rng.normal_matrix(2, 6)).unwrap().add_row_broadcast(&[1.0, -2.0, 0.5, 3.0, 0.0, 7.0]).unwrap();
        let model = pca_fit(&data, 2).unwrap();
        let back = pca_inverse(&model, &pca_transform(&model, &data).unwrap()).unwrap();
        assert!(back.sub(&data).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn sign_convention_and_orthonormality() {
        let mut rng = Rng::new(5);
        let model = pca_fit(&rng.normal_matrix(25, 4), 3).unwrap();
        let gram = model.components.t_matmul(&model.components).unwrap();
        assert!(gram.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-8);
        for k in 0..3 {
            let c = model.components.column(k);
            let pivot = c.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot > 0.0);
        }
        assert!(model.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn fewer_rows_than_features() {
        let mut rng = Rng::new(6);
        let model = pca_fit(&rng.normal_matrix(3, 5), 5).unwrap();
        let gram = model.components.t_matmul(&model.components).unwrap();
        assert!(gram.sub(&Matrix::identity(5)).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn constant_column_allowed_small_n_rejected() {
        let data = Matrix::from_fn(10, 2, |i, j| if j == 0 { 3.0 } else { i as f64 });
        assert!(pca_fit(&data, 2).is_ok());
        assert!(pca_fit(&Matrix::zeros(1, 2), 1).is_err());
        assert!(pca_fit(&data, 3).is_err());
        assert!(pca_fit(&data, 0).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = Rng::new(7);
        let model = pca_fit(&rng.normal_matrix(10, 3), 2).unwrap();
        assert!(pca_transform(&model, &Matrix::zeros(2, 4)).is_err());
        assert!(pca_inverse(&model, &Matrix::zeros(2, 3)).is_err());
    }
}
