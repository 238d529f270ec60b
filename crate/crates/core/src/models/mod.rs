//! Analytic target models with closed-form metrics and metric derivatives.

mod banana;
pub mod data;
mod funnel;
mod gaussian;
mod logistic;
mod oscillator;
pub mod softabs;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

pub use banana::BananaModel;
pub use data::{generate_banana_data, generate_logistic_data, BANANA_DATA_SEED, LOGISTIC_DATA_SEED};
pub use funnel::FunnelModel;
pub use gaussian::GaussianModel;
pub use logistic::{log_sigmoid, sigmoid, LogisticModel};
pub use oscillator::HarmonicOscillator;
pub use softabs::{softabs_metric, softabs_metric_grad, SoftAbs};

use crate::error::{Error, Result};
use crate::hamiltonian::TargetModel;

/// Banana data set: `n = 100`, `θ = (1/2, 1/√2)`, `σ_y = σ_θ = 2`.
pub fn reference_banana() -> BananaModel {
    let y = generate_banana_data(BANANA_DATA_SEED, 100, [0.5, 0.5f64.sqrt()], 2.0)
        .expect("n = 100 is valid");
    BananaModel::new(y, 2.0, 2.0).expect("reference banana parameters are valid")
}

/// Synthetic logistic regression, `n = 500`, `k = 4`.
pub fn reference_logistic() -> LogisticModel {
    let beta = DVector::from_vec(vec![0.5, -1.0, 0.25, 1.0]);
    let (x, y) = generate_logistic_data(LOGISTIC_DATA_SEED, 500, 4, &beta).expect("valid sizes");
    LogisticModel::new(x, y).expect("generated data is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gaussian,
    Banana,
    Funnel,
    Logistic,
    Oscillator,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Gaussian,
        ModelKind::Banana,
        ModelKind::Funnel,
        ModelKind::Logistic,
        ModelKind::Oscillator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Banana => "banana",
            ModelKind::Funnel => "funnel",
            ModelKind::Logistic => "logistic",
            ModelKind::Oscillator => "oscillator",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::Gaussian => "2-d Gaussian with constant metric Σ⁻¹ (quadratic Hamiltonian)",
            ModelKind::Banana => "banana-shaped posterior, y ~ N(θ₁ + θ₂², σ_y²), Fisher metric",
            ModelKind::Funnel => "Neal's funnel (10 x + v) with SoftAbs Hessian metric",
            ModelKind::Logistic => "Bayesian logistic regression, metric XᵀΛX + Id",
            ModelKind::Oscillator => "harmonic oscillator ω²q²/2 + p²/2 with identity metric",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

/// Any bundled model behind one type.
#[derive(Debug, Clone)]
pub enum Bundled {
    Gaussian(GaussianModel),
    Banana(BananaModel),
    Funnel(FunnelModel),
    Logistic(LogisticModel),
    Oscillator(HarmonicOscillator),
}

impl Bundled {
    /// The model with its reference parameters.
    pub fn reference(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gaussian => Bundled::Gaussian(GaussianModel::reference()),
            ModelKind::Banana => Bundled::Banana(reference_banana()),
            ModelKind::Funnel => Bundled::Funnel(FunnelModel::default()),
            ModelKind::Logistic => Bundled::Logistic(reference_logistic()),
            ModelKind::Oscillator => Bundled::Oscillator(HarmonicOscillator::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Bundled::Gaussian(_) => ModelKind::Gaussian,
            Bundled::Banana(_) => ModelKind::Banana,
            Bundled::Funnel(_) => ModelKind::Funnel,
            Bundled::Logistic(_) => ModelKind::Logistic,
            Bundled::Oscillator(_) => ModelKind::Oscillator,
        }
    }

    /// Deterministic starting point: the Gaussian mean, zero otherwise.
    pub fn initial_point(&self) -> DVector<f64> {
        match self {
            Bundled::Gaussian(m) => m.mean().clone(),
            Bundled::Oscillator(m) => {
                let mut q = DVector::zeros(m.dim);
                q[0] = 1.0;
                q
            }
            other => DVector::zeros(other.dim()),
        }
    }

    /// A random position in a high-density region, for audits and probes.
    ///
    /// Gaussian: an exact posterior draw. Banana: `θ₂` standard normal with
    /// `θ₁ + θ₂²` near the data mean. Funnel: `v ~ Normal(0, 1.5²)` and
    /// `x_i ~ Normal(0, e^{-v})`. Logistic: `β ~ Normal(0, 0.5² Id)`.
    /// Oscillator: `q ~ Normal(0, ω⁻² Id)`.
    pub fn draw_probe<R: RngCore + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut normal = |n: usize| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        match self {
            Bundled::Gaussian(m) => m.mean() + m.covariance().lower() * normal(m.dim()),
            Bundled::Banana(m) => {
                let y = m.observations();
                let ybar = y.iter().sum::<f64>() / y.len() as f64;
                let spread = m.sigma_y() / (y.len() as f64).sqrt();
                let z = normal(2);
                let t2 = z[0];
                DVector::from_vec(vec![ybar - t2 * t2 + spread * z[1], t2])
            }
            Bundled::Funnel(m) => {
                let z = normal(m.num_x() + 1);
                let v = 1.5 * z[m.num_x()];
                let scale = (-0.5 * v).exp();
                let mut q = z * scale;
                q[m.num_x()] = v;
                q
            }
            Bundled::Logistic(m) => normal(m.dim()) * 0.5,
            Bundled::Oscillator(m) => normal(m.dim) / m.omega,
        }
    }

    fn inner(&self) -> &dyn TargetModel {
        match self {
            Bundled::Gaussian(m) => m,
            Bundled::Banana(m) => m,
            Bundled::Funnel(m) => m,
            Bundled::Logistic(m) => m,
            Bundled::Oscillator(m) => m,
        }
    }
}

impl TargetModel for Bundled {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        self.inner().log_posterior(q)
    }
    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        self.inner().grad_log_posterior(q)
    }
    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.inner().metric(q)
    }
    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.inner().metric_grad(q)
    }
    fn name(&self) -> &str {
        self.kind().as_str()
    }
}
