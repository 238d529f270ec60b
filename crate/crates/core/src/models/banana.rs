use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::TargetModel;

/// Posterior of `(θ₁, θ₂)` under `y_i ~ Normal(θ₁ + θ₂², σ_y²)` with
/// independent `Normal(0, σ_θ²)` priors.
///
/// The metric is the Fisher information plus the prior precision:
///
/// ```text
/// G(θ) = [ n/σ_y² + 1/σ_θ²     2nθ₂/σ_y²            ]
///        [ 2nθ₂/σ_y²           4nθ₂²/σ_y² + 1/σ_θ²  ]
/// ```
#[derive(Debug, Clone)]
pub struct BananaModel {
    observations: Vec<f64>,
    sigma_y: f64,
    sigma_theta: f64,
}

impl BananaModel {
    pub fn new(observations: Vec<f64>, sigma_y: f64, sigma_theta: f64) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(sigma_y > 0.0) || !(sigma_theta > 0.0) {
            return Err(Error::InvalidConfig(
                "banana scales must be positive".into(),
            ));
        }
        if observations.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: "banana observations",
            });
        }
        Ok(Self {
            observations,
            sigma_y,
            sigma_theta,
        })
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    pub fn sigma_theta(&self) -> f64 {
        self.sigma_theta
    }

    fn n(&self) -> f64 {
        self.observations.len() as f64
    }
}

impl TargetModel for BananaModel {
    fn dim(&self) -> usize {
        2
    }

    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        let (t1, t2) = (q[0], q[1]);
        let mean = t1 + t2 * t2;
        let vy = self.sigma_y * self.sigma_y;
        let vt = self.sigma_theta * self.sigma_theta;
        let sse: f64 = self.observations.iter().map(|y| (y - mean).powi(2)).sum();
        let likelihood = -0.5 * self.n() * (2.0 * PI * vy).ln() - sse / (2.0 * vy);
        let prior = -(2.0 * PI * vt).ln() - (t1 * t1 + t2 * t2) / (2.0 * vt);
        likelihood + prior
    }

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        let (t1, t2) = (q[0], q[1]);
        let mean = t1 + t2 * t2;
        let vy = self.sigma_y * self.sigma_y;
        let vt = self.sigma_theta * self.sigma_theta;
        let residual: f64 = self.observations.iter().map(|y| y - mean).sum::<f64>() / vy;
        DVector::from_vec(vec![residual - t1 / vt, 2.0 * t2 * residual - t2 / vt])
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let t2 = q[1];
        let vy = self.sigma_y * self.sigma_y;
        let prior = 1.0 / (self.sigma_theta * self.sigma_theta);
        let n = self.n();
        let off = 2.0 * n * t2 / vy;
        DMatrix::from_row_slice(
            2,
            2,
            &[n / vy + prior, off, off, 4.0 * n * t2 * t2 / vy + prior],
        )
    }

    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let t2 = q[1];
        let vy = self.sigma_y * self.sigma_y;
        let n = self.n();
        let off = 2.0 * n / vy;
        vec![
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, off, off, 8.0 * n * t2 / vy]),
        ]
    }

    fn name(&self) -> &str {
        "banana"
    }
}
