//! Small dense linear-algebra helpers.
//!
//! Systems here are (I - gamma P_pi) or its transpose: dense, diagonally
//! dominant, and no larger than a few thousand rows, so a partial-pivot LU is
//! the right tool. nalgebra supplies the factorization; callers keep the
//! residual contracts.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Solve `a x = b` by LU with partial pivoting.
pub(crate) fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "solve: matrix {}x{}, rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = to_na(a).lu();
    let x = lu
        .solve(&DVector::from_iterator(b.len(), b.iter().copied()))
        .ok_or_else(|| Error::SolveFailure("singular matrix in LU solve".into()))?;
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Solve `a^T x = b` without materializing the transpose at the call site.
pub(crate) fn solve_transpose(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "solve_transpose: matrix {}x{}, rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let lu = to_na(a).transpose().lu();
    let x = lu
        .solve(&DVector::from_iterator(b.len(), b.iter().copied()))
        .ok_or_else(|| Error::SolveFailure("singular matrix in LU solve".into()))?;
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Max-norm residual ||a x - b||_inf, used for post-solve checks.
pub(crate) fn residual_inf(a: &Array2<f64>, x: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        let mut acc = 0.0;
        for j in 0..a.ncols() {
            acc += a[[i, j]] * x[j];
        }
        worst = worst.max((acc - b[i]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_small_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![3.0, 5.0];
        let x = solve(&a, &b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
        assert!(residual_inf(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn transpose_solve_matches_explicit_transpose() {
        let a = array![[1.0, 0.25], [-0.5, 2.0]];
        let b = array![1.0, -1.0];
        let x = solve_transpose(&a, &b).unwrap();
        let at = array![[1.0, -0.5], [0.25, 2.0]];
        assert!(residual_inf(&at, &x, &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_solve_failure() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![1.0, 2.0];
        assert!(matches!(solve(&a, &b), Err(Error::SolveFailure(_))));
    }
}
