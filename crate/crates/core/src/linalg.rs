//! Eigenvalue checks used to validate Gram matrices.

use nalgebra::{DMatrix, SymmetricEigen};

/// (min, max) eigenvalue of the symmetric part of `m`.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// True when the smallest eigenvalue is at least `-rel_tol * max(|max eigenvalue|, tiny)`.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let (min, max) = eigen_range(m);
    min >= -rel_tol * max.abs().max(f64::MIN_POSITIVE)
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}
