//! The SoftAbs map: a symmetric matrix `H = Q diag(λ) Qᵀ` is sent to
//! `Q diag(λ coth(αλ)) Qᵀ`, a smooth absolute value of its spectrum that is
//! positive definite with every eigenvalue at least `1/α`.
//!
//! Derivatives follow the Daleckii–Krein formula: for a perturbation `dH`,
//! `dG = Q (Γ ∘ (Qᵀ dH Q)) Qᵀ` with `Γ_ij` the first divided difference of
//! the scalar map at `(λ_i, λ_j)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, SpdMatrix, SYMMETRY_TOLERANCE};

pub const DEFAULT_ALPHA: f64 = 1e6;

// Below this |αλ| the series expansions are used.
const SERIES_CUTOFF: f64 = 1e-3;

/// `λ coth(αλ)`, with limit `1/α` at zero.
pub fn softabs_value(lambda: f64, alpha: f64) -> f64 {
    let x = alpha * lambda;
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        (1.0 + x2 / 3.0 - x2 * x2 / 45.0) / alpha
    } else {
        lambda / x.tanh()
    }
}

/// `d/dλ [λ coth(αλ)] = coth(αλ) - αλ / sinh²(αλ)`.
pub fn softabs_derivative(lambda: f64, alpha: f64) -> f64 {
    let x = alpha * lambda;
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        x * (2.0 / 3.0 - 4.0 * x2 / 45.0)
    } else if x.abs() > 350.0 {
        x.signum()
    } else {
        let s = x.sinh();
        1.0 / x.tanh() - x / (s * s)
    }
}

/// Eigendecomposition of a Hessian together with its SoftAbs image.
#[derive(Debug, Clone)]
pub struct SoftAbs {
    alpha: f64,
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    mapped: DVector<f64>,
    divided_differences: DMatrix<f64>,
}

impl SoftAbs {
    pub fn new(hessian: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "SoftAbs sharpness must be positive, got {alpha}"
            )));
        }
        if !hessian.is_square() {
            return Err(Error::DimensionMismatch {
                expected: hessian.nrows(),
                actual: hessian.ncols(),
            });
        }
        if hessian.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigendecompositionFailure);
        }
        let asymmetry = max_asymmetry(hessian);
        if asymmetry > SYMMETRY_TOLERANCE * hessian.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::MetricNotSymmetric { asymmetry });
        }
        let eigen = SymmetricEigen::try_new(hessian.clone(), f64::EPSILON, 0)
            .ok_or(Error::EigendecompositionFailure)?;
        let eigenvalues = eigen.eigenvalues;
        let eigenvectors = eigen.eigenvectors;
        let mapped = eigenvalues.map(|l| softabs_value(l, alpha));
        let n = eigenvalues.len();
        let scale = eigenvalues.amax().max(1.0);
        let divided_differences = DMatrix::from_fn(n, n, |i, j| {
            let (li, lj) = (eigenvalues[i], eigenvalues[j]);
            if (li - lj).abs() <= 1e-8 * scale {
                0.5 * (softabs_derivative(li, alpha) + softabs_derivative(lj, alpha))
            } else {
                (mapped[i] - mapped[j]) / (li - lj)
            }
        });
        Ok(Self {
            alpha,
            eigenvectors,
            eigenvalues,
            mapped,
            divided_differences,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn mapped_eigenvalues(&self) -> &DVector<f64> {
        &self.mapped
    }

    /// `Q diag(λ coth(αλ)) Qᵀ`, symmetrized.
    pub fn matrix(&self) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * self.mapped[j]);
        let g = scaled * q.transpose();
        (&g + g.transpose()) * 0.5
    }

    /// Directional derivative of the SoftAbs metric along `dH`.
    pub fn derivative(&self, hessian_direction: &DMatrix<f64>) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let rotated = q.transpose() * hessian_direction * q;
        let weighted = rotated.component_mul(&self.divided_differences);
        let d = q * weighted * q.transpose();
        (&d + d.transpose()) * 0.5
    }
}

/// SoftAbs image of `hessian` as a factorized metric.
pub fn softabs_metric(hessian: &DMatrix<f64>, alpha: f64) -> Result<SpdMatrix> {
    SpdMatrix::new(SoftAbs::new(hessian, alpha)?.matrix())
}

/// `∂G/∂q_k` for each slice `∂H/∂q_k` of the third-derivative tensor.
pub fn softabs_metric_grad(
    hessian: &DMatrix<f64>,
    hessian_grad: &[DMatrix<f64>],
    alpha: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let softabs = SoftAbs::new(hessian, alpha)?;
    Ok(hessian_grad.iter().map(|d| softabs.derivative(d)).collect())
}
