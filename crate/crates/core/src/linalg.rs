//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Returns the symmetric part `(m + mᵀ)/2`.
///
/// Quadratic forms only see the symmetric part of their matrix; the reward
/// and value blocks are symmetrized after assembly so that factorizations
/// and eigenvalue checks behave.
pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Embeds an `(n-1) x (n-1)` risky-block matrix into `n x n` with a zero
/// first (bond) row and column.
pub fn embed_risky_block(risky: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((1, 1), (n - 1, n - 1)).copy_from(risky);
    out
}

/// Cholesky factorization of a symmetric positive-definite matrix, with a
/// contextual error instead of an `Option`.
pub fn cholesky(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Numeric(format!("{context}: matrix is not positive definite")))
}

/// log-determinant from a Cholesky factor.
pub fn logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Quadratic form `xᵀ m y`.
pub fn quad_form(x: &DVector<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (m * y).dot(x)
}

/// Log-density of `N(mean, cov)` at `x`, given the Cholesky factor of the
/// covariance.
pub fn gaussian_logdensity(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov_chol: &Cholesky<f64, Dyn>,
) -> f64 {
    let n = x.len() as f64;
    let delta = x - mean;
    let white = cov_chol.solve(&delta);
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet(cov_chol) + delta.dot(&white))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn embed_keeps_bond_row_and_column_zero() {
        let risky = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let full = embed_risky_block(&risky, 3);
        for i in 0..3 {
            assert_eq!(full[(0, i)], 0.0);
            assert_eq!(full[(i, 0)], 0.0);
        }
        assert_eq!(full[(1, 2)], 0.5);
    }

    #[test]
    fn logdet_matches_determinant() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]);
        let chol = cholesky(&m, "test").unwrap();
        assert_relative_eq!(logdet(&chol), m.determinant().ln(), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_logdensity_matches_scalar_formula() {
        let cov = DMatrix::from_element(1, 1, 0.25);
        let chol = cholesky(&cov, "test").unwrap();
        let x = DVector::from_element(1, 1.2);
        let mean = DVector::from_element(1, 0.5);
        let sigma: f64 = 0.5;
        let expected = -0.5 * ((2.0 * std::f64::consts::PI * sigma * sigma).ln()
            + (1.2f64 - 0.5).powi(2) / (sigma * sigma));
        assert_relative_eq!(gaussian_logdensity(&x, &mean, &chol), expected, epsilon = 1e-12);
    }
}
