use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a general real matrix.
pub fn complex_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues())
}

/// Largest absolute entry difference between `m` and its transpose.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
