use nalgebra::{DMatrix, DVector};

use crate::hamiltonian::TargetModel;

/// `H(q, p) = ω² |q|² / 2 + |p|² / 2`: log-posterior `-ω²|q|²/2` with the
/// identity metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOscillator {
    pub omega: f64,
    pub dim: usize,
}

impl HarmonicOscillator {
    pub fn new(omega: f64, dim: usize) -> Self {
        assert!(dim >= 1);
        Self { omega, dim }
    }
}

impl Default for HarmonicOscillator {
    fn default() -> Self {
        Self::new(1.0, 1)
    }
}

impl TargetModel for HarmonicOscillator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        -0.5 * self.omega * self.omega * q.norm_squared()
    }

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        -(self.omega * self.omega) * q
    }

    fn metric(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn metric_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.dim, self.dim); self.dim]
    }

    fn name(&self) -> &str {
        "oscillator"
    }
}
