//! Closed-form optimality, calibration and PCA against independent oracles.

use adapts_core::adapters::{
    closed_form_residuals, fit_from_residuals, reduced_gradient, reduced_loss, ForecastDistribution,
};
use adapts_core::eval::{default_levels, empirical_coverage};
use adapts_core::forecaster::random_linear_fm;
use adapts_core::numkit::{default_rcond, pca_fit, pinv};
use adapts_core::{Matrix, Rng};
use nalgebra::DMatrix;

fn random_instance(rng: &mut Rng) -> (Matrix, Matrix) {
    let (l, h) = (4 + rng.below(12), 1 + rng.below(8));
    let d = 1 + rng.below(6);
    let fm = random_linear_fm(rng, l, h).unwrap();
    let n = 1 + rng.below(5);
    let xs: Vec<Matrix> = (0..n).map(|_| rng.normal_matrix(l, d)).collect();
    let ys: Vec<Matrix> = (0..n).map(|_| rng.normal_matrix(h, d)).collect();
    closed_form_residuals(&xs, &ys, &fm).unwrap()
}

#[test]
fn closed_form_is_stationary_and_minimal() {
    let mut rng = Rng::new(2024);
    for _ in 0..100 {
        let (a, b) = random_instance(&mut rng);
        let fit = fit_from_residuals(&a, &b, 0.0).unwrap();
        let bta = b.t_matmul(&a).unwrap();
        let g = reduced_gradient(&a, &b, &fit.m_star).unwrap();
        assert!(g.frobenius_norm() / bta.frobenius_norm() < 1e-6);
        let base = reduced_loss(&a, &b, &fit.m_star).unwrap();
        for _ in 0..100 {
            let e = rng.normal_matrix(a.cols(), a.cols());
            let step = e.scale(1e-3 / e.frobenius_norm());
            let moved = reduced_loss(&a, &b, &fit.m_star.add(&step).unwrap()).unwrap();
            assert!(moved - base >= -1e-9);
        }
        // The fitted adapter's decoder realizes M*.
        let m_from_w = pinv(&fit.w, default_rcond(&fit.w)).unwrap();
        assert!((reduced_loss(&a, &b, &m_from_w).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
    }
}

#[test]
fn closed_form_beats_identity_on_reduced_loss() {
    let mut rng = Rng::new(7);
    for _ in 0..20 {
        let (a, b) = random_instance(&mut rng);
        let fit = fit_from_residuals(&a, &b, 0.0).unwrap();
        let d = a.cols();
        assert!(reduced_loss(&a, &b, &fit.m_star).unwrap() <= reduced_loss(&a, &b, &Matrix::identity(d)).unwrap() + 1e-12);
    }
}

fn gaussian_dists(rng: &mut Rng, n_windows: usize, s: usize, spread: f64) -> (Vec<ForecastDistribution>, Vec<Matrix>) {
    let (h, d) = (5, 4);
    let mut dists = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..n_windows {
        let mean = rng.normal_matrix(h, d);
        let std = rng.uniform_matrix(h, d, 0.5, 2.0);
        let target = Matrix::from_fn(h, d, |i, j| mean[(i, j)] + std[(i, j)] * rng.normal());
        let samples = (0..s).map(|_| Matrix::from_fn(h, d, |i, j| mean[(i, j)] + spread * std[(i, j)] * rng.normal())).collect();
        dists.push(ForecastDistribution::new(samples).unwrap());
        targets.push(target);
    }
    (dists, targets)
}

#[test]
fn calibrated_forecaster_has_small_ece() {
    let mut rng = Rng::new(31);
    let (dists, targets) = gaussian_dists(&mut rng, 600, 100, 1.0);
    let table = empirical_coverage(&dists, &targets, &default_levels()).unwrap();
    assert!(table.n_cells >= 10_000);
    assert!(table.ece < 0.02, "ece {}", table.ece);
}

#[test]
fn overconfident_forecaster_is_flagged() {
    let mut rng = Rng::new(32);
    let (dists, targets) = gaussian_dists(&mut rng, 600, 100, 0.25);
    let table = empirical_coverage(&dists, &targets, &default_levels()).unwrap();
    assert!(table.ece > 0.10, "ece {}", table.ece);
    let c90 = empirical_coverage(&dists, &targets, &[0.9]).unwrap().coverage[0];
    assert!(c90 < 0.9, "coverage {c90}");
}

#[test]
fn pca_matches_symmetric_eigendecomposition() {
    let mut rng = Rng::new(41);
    let mixing = rng.normal_matrix(5, 5);
    let data = rng.normal_matrix(200, 5).matmul(&mixing).unwrap();
    let model = pca_fit(&data, 5).unwrap();

    let n = data.rows();
    let means = data.column_means();
    let centered = DMatrix::from_fn(n, 5, |i, j| data[(i, j)] - means[j]);
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    for (k, &idx) in order.iter().enumerate() {
        let ev = eig.eigenvalues[idx];
        assert!((model.explained_variance[k] - ev).abs() < 1e-9 * ev.abs().max(1.0));
        let dot: f64 = (0..5).map(|i| model.components[(i, k)] * eig.eigenvectors[(i, idx)]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "component {k}: |dot| = {}", dot.abs());
    }
}
