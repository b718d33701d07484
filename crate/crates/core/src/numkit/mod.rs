//! Dense linear algebra, seeded randomness and PCA.

mod matrix;
mod pca;
mod rng;
mod solve;
mod svd;

pub use matrix::{matmul, Matrix};
pub use pca::{pca_fit, pca_inverse, pca_transform, total_variance, PcaModel};
pub use rng::{glorot_limit, glorot_uniform, Rng};
pub use solve::{regularized_inverse, solve};
pub use svd::{default_rcond, pinv, svd, SvdResult, CONVERGENCE_TOL, MAX_SWEEPS};
