use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::TargetModel;
use crate::models::softabs::{SoftAbs, DEFAULT_ALPHA};

const V_VARIANCE: f64 = 9.0;

/// Neal's funnel: `x_i ~ Normal(0, exp(-v))` for `i = 1..k`, `v ~ Normal(0, 9)`.
///
/// Coordinates are ordered `(x_1, …, x_k, v)`. The metric is the SoftAbs
/// image of the Hessian of the negative log-density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunnelModel {
    num_x: usize,
    alpha: f64,
}

impl FunnelModel {
    pub fn new(num_x: usize, alpha: f64) -> Result<Self> {
        if num_x == 0 {
            return Err(Error::InvalidConfig("funnel needs at least one x".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "SoftAbs sharpness must be positive, got {alpha}"
            )));
        }
        Ok(Self { num_x, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_x(&self) -> usize {
        self.num_x
    }

    /// Hessian of `-log p`.
    pub fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let k = self.num_x;
        let v = q[k];
        let ev = v.exp();
        let mut h = DMatrix::zeros(k + 1, k + 1);
        let mut sum_sq = 0.0;
        for i in 0..k {
            let x = q[i];
            h[(i, i)] = ev;
            h[(i, k)] = x * ev;
            h[(k, i)] = x * ev;
            sum_sq += x * x;
        }
        h[(k, k)] = 0.5 * sum_sq * ev + 1.0 / V_VARIANCE;
        h
    }

    /// `∂/∂q_j` of [`FunnelModel::hessian`] for each coordinate `j`.
    pub fn hessian_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let k = self.num_x;
        let v = q[k];
        let ev = v.exp();
        let mut slices = Vec::with_capacity(k + 1);
        for j in 0..k {
            let mut d = DMatrix::zeros(k + 1, k + 1);
            d[(j, k)] = ev;
            d[(k, j)] = ev;
            d[(k, k)] = q[j] * ev;
            slices.push(d);
        }
        // The v-derivative of every entry is the entry minus its constant part.
        let mut dv = self.hessian(q);
        dv[(k, k)] -= 1.0 / V_VARIANCE;
        slices.push(dv);
        slices
    }
}

impl Default for FunnelModel {
    fn default() -> Self {
        Self {
            num_x: 10,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl TargetModel for FunnelModel {
    fn dim(&self) -> usize {
        self.num_x + 1
    }

    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        let k = self.num_x;
        let v = q[k];
        let ev = v.exp();
        let sum_sq: f64 = q.rows(0, k).norm_squared();
        let xs = k as f64 * (-0.5 * (2.0 * PI).ln() + 0.5 * v) - 0.5 * sum_sq * ev;
        let prior = -0.5 * (2.0 * PI * V_VARIANCE).ln() - v * v / (2.0 * V_VARIANCE);
        xs + prior
    }

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        let k = self.num_x;
        let v = q[k];
        let ev = v.exp();
        let sum_sq: f64 = q.rows(0, k).norm_squared();
        DVector::from_fn(k + 1, |i, _| {
            if i < k {
                -q[i] * ev
            } else {
                0.5 * k as f64 - 0.5 * sum_sq * ev - v / V_VARIANCE
            }
        })
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match SoftAbs::new(&self.hessian(q), self.alpha) {
            Ok(s) => s.matrix(),
            // Surfaces as a non-finite metric, which the caller rejects.
            Err(_) => DMatrix::from_element(self.dim(), self.dim(), f64::NAN),
        }
    }

    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match SoftAbs::new(&self.hessian(q), self.alpha) {
            Ok(s) => self.hessian_grad(q).iter().map(|d| s.derivative(d)).collect(),
            Err(_) => vec![DMatrix::from_element(self.dim(), self.dim(), f64::NAN); self.dim()],
        }
    }

    fn name(&self) -> &str {
        "funnel"
    }
}
