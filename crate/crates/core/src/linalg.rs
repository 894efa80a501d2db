//! Small dense helpers for Hermitian matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue and a unit eigenvector for it.
pub fn min_eigenpair(m: &DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// `(m + m^dag) / 2`.
pub fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Trace norm of a Hermitian matrix: sum of absolute eigenvalues.
pub fn trace_norm(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Von Neumann entropy (natural log) with `0 ln 0 = 0`; tiny negative
/// eigenvalues from rounding are clamped to zero.
pub fn von_neumann_entropy(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.ln())
        .sum()
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
