use super::Matrix;
use crate::error::{Error, Result};

/// Solves `a · x = b` by LU with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("solve needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    if b.rows() != n {
        return Err(Error::mismatch("solve", a.shape(), b.shape()));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
            .expect("non-empty pivot range");
        if lu[(pivot, k)].abs() <= 1e-14 * scale {
            return Err(Error::Singular(format!("pivot {k} is {:.3e}", lu[(pivot, k)])));
        }
        if pivot != k {
            swap_rows(&mut lu, pivot, k);
            swap_rows(&mut x, pivot, k);
        }
        let diag = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= factor * x[(k, j)];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..x.cols() {
            let mut acc = x[(k, j)];
            for p in k + 1..n {
                acc -= lu[(k, p)] * x[(p, j)];
            }
            x[(k, j)] = acc / lu[(k, k)];
        }
    }
    Ok(x)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        data.swap(a * cols + j, b * cols + j);
    }
}

/// `(m + λI)⁻¹` via a direct solve.
pub fn regularized_inverse(m: &Matrix, lambda: f64) -> Result<Matrix> {
    if m.rows() != m.cols() {
        return Err(Error::Shape(format!("regularized_inverse needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    let n = m.rows();
    let shifted = m.add(&Matrix::identity(n).scale(lambda))?;
    solve(&shifted, &Matrix::identity(n)).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("m + {lambda}·I is singular: {msg}")),
        other => other,
    })
}
