//! Small dense solvers for the consequent least-squares step.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape("Cholesky needs a square matrix".into()));
    }
    let mut l = Matrix::filled(n, n, T::zero());
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "matrix is not positive definite (pivot {j} = {d})"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b`.
pub fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Least squares `min ||A x - y||` through the ridge-regularized normal
/// equations `(A^T A + ridge I) x = A^T y`.
///
/// `refinements` extra passes of iterated Tikhonov correction remove most of
/// the ridge bias along well-determined directions while leaving
/// rank-deficient directions damped.
pub fn ridge_least_squares<T: Scalar>(a: &Matrix<T>, y: &[T], ridge: T, refinements: usize) -> Result<Vec<T>> {
    let (n, m) = a.shape();
    if y.len() != n {
        return Err(Error::Shape("design rows and targets differ".into()));
    }
    let mut gram = Matrix::filled(m, m, T::zero());
    let mut rhs = vec![T::zero(); m];
    for (row, &t) in a.iter_rows().zip(y) {
        for i in 0..m {
            if row[i] == T::zero() {
                continue;
            }
            rhs[i] += row[i] * t;
            for j in i..m {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let mut regularized = gram.clone();
    for i in 0..m {
        regularized[(i, i)] += ridge;
    }
    let l = cholesky(&regularized)?;
    let mut x = cholesky_solve(&l, &rhs);
    for _ in 0..refinements {
        let residual: Vec<T> = (0..m)
            .map(|i| rhs[i] - (0..m).map(|j| gram[(i, j)] * x[j]).sum::<T>())
            .collect();
        let dx = cholesky_solve(&l, &residual);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    Ok(x)
}
