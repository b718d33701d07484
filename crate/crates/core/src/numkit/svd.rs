//! Thin SVD by one-sided (Hestenes) Jacobi rotations, and the
//! Moore–Penrose pseudo-inverse built on it.

use super::Matrix;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// `m = u · diag(s) · vt` with `k = min(rows, cols)` singular triplets.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix,
    /// Nonnegative, nonincreasing.
    pub s: Vec<f64>,
    /// `k × cols`, orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt).expect("svd factors are conformable")
    }
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument("svd input contains non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(SvdResult { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() })
    }
}

/// One-sided Jacobi on a matrix with `rows >= cols`.
fn jacobi_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, n) = m.shape();
    // Work column-major: columns of `a` converge to u_i * s_i.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns below this squared norm are numerical zero; rotating them
    // against each other only shuffles rounding noise.
    let frob2: f64 = a.iter().flatten().map(|x| x * x).sum();
    let negligible = frob2 * (f64::EPSILON * f64::EPSILON);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&a[p], &a[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || alpha <= negligible || beta <= negligible {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                off = off.max(rel);
                if rel < CONVERGENCE_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if off < CONVERGENCE_TOL {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps")));
    }

    let mut triplets: Vec<(f64, Vec<f64>, Vec<f64>)> = a
        .into_iter()
        .zip(v)
        .map(|(col, vcol)| {
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm, col, vcol)
        })
        .collect();
    triplets.sort_by(|x, y| y.0.total_cmp(&x.0));

    let s_max = triplets.first().map_or(0.0, |t| t.0);
    let null_tol = s_max * f64::EPSILON * rows.max(n) as f64;
    let mut u = Matrix::zeros(rows, n);
    let mut vt = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let mut zero_cols = Vec::new();
    for (j, (norm, col, vcol)) in triplets.into_iter().enumerate() {
        s.push(norm);
        vt.row_mut(j).copy_from_slice(&vcol);
        if norm > null_tol && norm > 0.0 {
            let col: Vec<f64> = col.iter().map(|x| x / norm).collect();
            u.set_column(j, &col);
        } else {
            zero_cols.push(j);
        }
    }
    complete_orthonormal(&mut u, &zero_cols);
    Ok(SvdResult { u, s, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all other
/// columns (modified Gram–Schmidt against the standard basis).
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let rows = u.rows();
    let mut filled: Vec<usize> = (0..u.cols()).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0;
    for &j in missing {
        while candidate < rows {
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let col = u.column(k);
                    let dot: f64 = col.iter().zip(&e).map(|(a, b)| a * b).sum();
                    e.iter_mut().zip(&col).for_each(|(x, c)| *x -= dot * c);
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= norm);
                u.set_column(j, &e);
                filled.push(j);
                break;
            }
        }
    }
}

/// Default cutoff: `1e-12 × max(rows, cols)`, relative to the largest
/// singular value.
pub fn default_rcond(m: &Matrix) -> f64 {
    1e-12 * m.rows().max(m.cols()) as f64
}

/// Moore–Penrose pseudo-inverse. Singular values `≤ rcond · s_max` are
/// treated as zero.
pub fn pinv(m: &Matrix, rcond: f64) -> Result<Matrix> {
    if rcond < 0.0 {
        return Err(Error::InvalidArgument(format!("rcond must be >= 0, got {rcond}")));
    }
    let f = svd(m)?;
    let s_max = f.s.first().copied().unwrap_or(0.0);
    let cutoff = rcond * s_max;
    // p = V · diag(1/s) · Uᵀ
    let k = f.s.len();
    let mut v_scaled = f.vt.transpose();
    for j in 0..k {
        let inv = if f.s[j] > cutoff && f.s[j] > 0.0 { 1.0 / f.s[j] } else { 0.0 };
        for i in 0..v_scaled.rows() {
            v_scaled[(i, j)] *= inv;
        }
    }
    v_scaled.matmul_t(&f.u)
}
