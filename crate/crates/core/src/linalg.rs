//! Symmetric positive-definite matrices held together with their Cholesky
//! factor, so that solves, inverses and log-determinants share one
//! factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{ensure_finite, Error, Result};

/// Relative tolerance used when checking symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A validated symmetric positive-definite matrix and its factor `L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Validates and factorizes `matrix`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        ensure_finite(matrix.as_slice(), "metric")?;
        let asymmetry = max_asymmetry(&matrix);
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::MetricNotSymmetric { asymmetry });
        }
        let cholesky = Cholesky::new(matrix.clone()).ok_or(Error::MetricNotPositiveDefinite)?;
        if cholesky.l_dirty().diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::MetricNotPositiveDefinite);
        }
        Ok(Self { matrix, cholesky })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor `L` with `L Lᵀ = G`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.cholesky.l()
    }

    /// `log det G`, the sum of the log pivots doubled.
    pub fn log_det(&self) -> f64 {
        2.0 * self
            .cholesky
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
    }

    /// Solves `G x = b`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.cholesky.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.cholesky.inverse()
    }
}

/// Largest `|a_ij - a_ji|` over the matrix.
pub fn max_asymmetry(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows().min(matrix.ncols());
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    worst
}

/// `Σ_jk a_jk b_jk`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn log_det_matches_closed_form() {
        let g = SpdMatrix::new(dmatrix![2.0, 0.5; 0.5, 3.0]).unwrap();
        assert_relative_eq!(g.log_det(), (6.0_f64 - 0.25).ln(), epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let err = SpdMatrix::new(dmatrix![1.0, 2.0; 2.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::MetricNotPositiveDefinite));
    }

    #[test]
    fn rejects_asymmetric() {
        let err = SpdMatrix::new(dmatrix![1.0, 0.1; 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::MetricNotSymmetric { .. }));
    }

    #[test]
    fn rejects_nan() {
        let err = SpdMatrix::new(dmatrix![f64::NAN, 0.0; 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn lower_factor_reconstructs() {
        let m = dmatrix![4.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 2.0];
        let g = SpdMatrix::new(m.clone()).unwrap();
        let l = g.lower();
        assert!((&l * l.transpose() - m).amax() < 1e-14);
        let x = g.solve(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let back = g.matrix() * x;
        assert!((back - DVector::from_vec(vec![1.0, 2.0, 3.0])).amax() < 1e-13);
    }
}
