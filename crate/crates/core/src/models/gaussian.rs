use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::TargetModel;
use crate::linalg::SpdMatrix;

/// `q ~ Normal(μ, Σ)` with the constant metric `G = Σ⁻¹`, so that
/// `H(q, p) = ½ (q-μ)ᵀ Σ⁻¹ (q-μ) + ½ pᵀ Σ p + const` is quadratic.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: SpdMatrix,
    precision: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: covariance.nrows(),
            });
        }
        let covariance = SpdMatrix::new(covariance)?;
        let mut precision = covariance.inverse();
        // Cholesky inverses are symmetric only up to rounding.
        precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self {
            mean,
            covariance,
            precision,
        })
    }

    /// μ = (1/2, -1), Σ = [[1, 1/2], [1/2, 2]].
    pub fn reference() -> Self {
        Self::new(
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
        )
        .expect("reference covariance is positive definite")
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl TargetModel for GaussianModel {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        let r = q - &self.mean;
        -0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        -(&self.precision * (q - &self.mean))
    }

    fn metric(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        self.precision.clone()
    }

    fn metric_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let m = self.dim();
        vec![DMatrix::zeros(m, m); m]
    }

    fn name(&self) -> &str {
        "gaussian"
    }
}
