//! Conditional negativity of symmetric kernels.
//!
//! `N` is conditionally negative when `sum w_i w_j N_ij <= 0` for every
//! weight vector with `sum w_i = 0`. Equivalently the largest eigenvalue of
//! `N` compressed to the zero-sum hyperplane is `<= 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::galerkin::compress_off_constants;
use crate::error::{Error, Result};
use crate::hypspace::{distance, GroupWord};

pub const NEGATIVE_TYPE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeTypeReport {
    pub pass: bool,
    /// Largest Rayleigh quotient `w^T N w / w^T w` over zero-sum `w`.
    pub max_rayleigh: f64,
    /// Zero-sum weights attaining `max_rayleigh`, reported on failure.
    pub certificate: Option<Vec<f64>>,
}

pub fn distance_matrix(points: &[GroupWord]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| distance(&points[i], &points[j]) as f64)
}

pub fn negative_type_check(matrix: &DMatrix<f64>) -> Result<NegativeTypeReport> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidArgument(format!("{}x{} matrix is not square", n, matrix.ncols())));
    }
    let scale = matrix.amax().max(1.0);
    for i in 0..n {
        if matrix[(i, i)].abs() > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!("nonzero diagonal entry at {i}")));
        }
        for j in 0..i {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotSymmetric(i, j));
            }
        }
    }
    if n < 2 {
        return Ok(NegativeTypeReport {
            pass: true,
            max_rayleigh: f64::NEG_INFINITY,
            certificate: None,
        });
    }
    let compressed = compress_off_constants(matrix);
    let eig = compressed.symmetric_eigen();
    let (idx, &max) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let pass = max <= NEGATIVE_TYPE_TOL;
    let certificate = (!pass).then(|| {
        // Lift the eigenvector back through the reflection.
        let mut y = DVector::zeros(n);
        y.rows_mut(0, n - 1).copy_from(&eig.eigenvectors.column(idx));
        let mut u = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        u[n - 1] -= 1.0;
        let beta = 2.0 / u.dot(&u);
        let w = &y - &u * (beta * u.dot(&y));
        w.iter().copied().collect()
    });
    Ok(NegativeTypeReport {
        pass,
        max_rayleigh: max,
        certificate,
    })
}

pub fn negative_type_check_points(points: &[GroupWord]) -> Result<NegativeTypeReport> {
    negative_type_check(&distance_matrix(points))
}
