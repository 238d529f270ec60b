use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::TargetModel;

/// Numerically stable logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log σ(t) = -softplus(-t)`, without overflow for large `|t|`.
pub fn log_sigmoid(t: f64) -> f64 {
    -((-t).max(0.0) + (-t.abs()).exp().ln_1p())
}

/// Bayesian logistic regression with `β ~ Normal(0, Id)`.
///
/// Metric: Fisher information plus prior precision, `G(β) = Xᵀ Λ X + Id`
/// with `Λ_ii = σ(x_iᵀβ)(1 - σ(x_iᵀβ))`.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl LogisticModel {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: "logistic features",
            });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    fn linear_predictor(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.features * beta
    }

    // Xᵀ diag(w) X
    fn weighted_gram(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let x = &self.features;
        let weighted = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * weights[i]);
        let g = x.transpose() * weighted;
        (&g + g.transpose()) * 0.5
    }
}

impl TargetModel for LogisticModel {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn log_posterior(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.linear_predictor(beta);
        let likelihood: f64 = eta
            .iter()
            .zip(self.labels.iter())
            .map(|(&t, &y)| y * log_sigmoid(t) + (1.0 - y) * log_sigmoid(-t))
            .sum();
        let k = self.dim() as f64;
        likelihood - 0.5 * beta.norm_squared() - 0.5 * k * (2.0 * PI).ln()
    }

    fn grad_log_posterior(&self, beta: &DVector<f64>) -> DVector<f64> {
        let eta = self.linear_predictor(beta);
        let residual = DVector::from_fn(eta.len(), |i, _| self.labels[i] - sigmoid(eta[i]));
        self.features.transpose() * residual - beta
    }

    fn metric(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let eta = self.linear_predictor(beta);
        let lambda = eta.map(|t| {
            let s = sigmoid(t);
            s * (1.0 - s)
        });
        self.weighted_gram(&lambda) + DMatrix::identity(self.dim(), self.dim())
    }

    fn metric_grad(&self, beta: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let eta = self.linear_predictor(beta);
        // ∂Λ_ii/∂β_j = σ(1-σ)(1-2σ) x_ij
        let curvature = eta.map(|t| {
            let s = sigmoid(t);
            s * (1.0 - s) * (1.0 - 2.0 * s)
        });
        (0..self.dim())
            .map(|j| {
                let w = DVector::from_fn(eta.len(), |i, _| curvature[i] * self.features[(i, j)]);
                self.weighted_gram(&w)
            })
            .collect()
    }

    fn name(&self) -> &str {
        "logistic"
    }
}
