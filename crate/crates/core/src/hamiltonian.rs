//! Phase-space state, the target-model interface and the RMHMC Hamiltonian
//!
//! ```text
//! H(q, p) = -L(q) + ½ pᵀ G(q)⁻¹ p + ½ log det G(q)
//! ```
//!
//! together with its partial derivatives in `p` and `q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{frobenius_inner, SpdMatrix};

/// A position/momentum pair of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    /// Panics if the dimensions differ or are zero.
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "position and momentum dimensions differ");
        assert!(!q.is_empty(), "phase point must have dimension at least 1");
        Self { q, p }
    }

    pub fn from_slices(q: &[f64], p: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(p))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// The momentum flip `(q, p) ↦ (q, -p)`.
    pub fn flipped(&self) -> Self {
        Self {
            q: self.q.clone(),
            p: -&self.p,
        }
    }

    /// Concatenation `(q, p)` as one vector of length `2m`.
    pub fn to_vector(&self) -> DVector<f64> {
        let m = self.dim();
        DVector::from_fn(2 * m, |i, _| if i < m { self.q[i] } else { self.p[i - m] })
    }

    /// Inverse of [`PhasePoint::to_vector`].
    pub fn from_vector(z: &DVector<f64>) -> Self {
        assert!(z.len().is_multiple_of(2) && !z.is_empty());
        let m = z.len() / 2;
        Self {
            q: z.rows(0, m).into_owned(),
            p: z.rows(m, m).into_owned(),
        }
    }

    /// Max-norm distance to `other` over both blocks.
    pub fn max_distance(&self, other: &PhasePoint) -> f64 {
        (&self.q - &other.q).amax().max((&self.p - &other.p).amax())
    }

    /// Euclidean distance to `other` over both blocks.
    pub fn euclidean_distance(&self, other: &PhasePoint) -> f64 {
        ((&self.q - &other.q).norm_squared() + (&self.p - &other.p).norm_squared()).sqrt()
    }
}

/// A differentiable log-posterior with a Riemannian metric.
///
/// Implementations are immutable after construction. `metric_grad` returns
/// `∂G/∂q_i` for `i = 0..dim`, each symmetric.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn log_posterior(&self, q: &DVector<f64>) -> f64;

    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64>;

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>>;

    /// Short identifier used in reports.
    fn name(&self) -> &str {
        "model"
    }
}

impl<M: TargetModel + ?Sized> TargetModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        (**self).log_posterior(q)
    }
    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        (**self).grad_log_posterior(q)
    }
    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric(q)
    }
    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        (**self).metric_grad(q)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<M: TargetModel + ?Sized> TargetModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_posterior(&self, q: &DVector<f64>) -> f64 {
        (**self).log_posterior(q)
    }
    fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
        (**self).grad_log_posterior(q)
    }
    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (**self).metric(q)
    }
    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        (**self).metric_grad(q)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

fn check_dim<M: TargetModel + ?Sized>(model: &M, q: &DVector<f64>) -> Result<()> {
    if q.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// Factorized metric at one position.
pub fn factor_metric<M: TargetModel + ?Sized>(model: &M, q: &DVector<f64>) -> Result<SpdMatrix> {
    SpdMatrix::new(model.metric(q))
}

/// Everything about the geometry at `q` that the momentum force needs and
/// that does not depend on `p`.
///
/// `potential_force[i] = -∂L/∂q_i + ½ tr(G⁻¹ ∂G/∂q_i)`.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub metric: SpdMatrix,
    pub inverse: DMatrix<f64>,
    pub metric_grad: Vec<DMatrix<f64>>,
    pub potential_force: DVector<f64>,
}

impl LocalGeometry {
    pub fn at<M: TargetModel + ?Sized>(model: &M, q: &DVector<f64>) -> Result<Self> {
        let metric = factor_metric(model, q)?;
        let inverse = metric.inverse();
        let metric_grad = model.metric_grad(q);
        if metric_grad.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: metric_grad.len(),
            });
        }
        for d in &metric_grad {
            ensure_finite(d.as_slice(), "metric gradient")?;
        }
        let grad_l = model.grad_log_posterior(q);
        ensure_finite(grad_l.as_slice(), "log-posterior gradient")?;
        let potential_force = DVector::from_fn(q.len(), |i, _| {
            -grad_l[i] + 0.5 * frobenius_inner(&inverse, &metric_grad[i])
        });
        Ok(Self {
            metric,
            inverse,
            metric_grad,
            potential_force,
        })
    }

    /// `∂H/∂q` given the velocity `v = G⁻¹ p`.
    pub fn grad_q_with_velocity(&self, velocity: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(velocity.len(), |i, _| {
            let dg = &self.metric_grad[i];
            self.potential_force[i] - 0.5 * velocity.dot(&(dg * velocity))
        })
    }

    /// `∂H/∂q` at momentum `p`.
    pub fn grad_q(&self, p: &DVector<f64>) -> DVector<f64> {
        self.grad_q_with_velocity(&(&self.inverse * p))
    }
}

/// `H(q, p)`.
pub fn hamiltonian<M: TargetModel + ?Sized>(model: &M, point: &PhasePoint) -> Result<f64> {
    check_dim(model, &point.q)?;
    let metric = factor_metric(model, &point.q)?;
    let velocity = metric.solve(&point.p);
    let value =
        -model.log_posterior(&point.q) + 0.5 * point.p.dot(&velocity) + 0.5 * metric.log_det();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteValue {
            context: "hamiltonian",
        })
    }
}

/// `∂H/∂p = G(q)⁻¹ p`.
pub fn grad_p_hamiltonian<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
) -> Result<DVector<f64>> {
    check_dim(model, &point.q)?;
    let velocity = factor_metric(model, &point.q)?.solve(&point.p);
    ensure_finite(velocity.as_slice(), "position velocity")?;
    Ok(velocity)
}

/// `∂H/∂q`. Note the sign: the momentum equation of motion is `ṗ = -∂H/∂q`.
pub fn grad_q_hamiltonian<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
) -> Result<DVector<f64>> {
    check_dim(model, &point.q)?;
    let grad = LocalGeometry::at(model, &point.q)?.grad_q(&point.p);
    ensure_finite(grad.as_slice(), "momentum force")?;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    /// `L(q) = -½ c |q|²` with metric `s·Id`.
    struct Isotropic {
        dim: usize,
        curvature: f64,
        scale: f64,
    }

    impl TargetModel for Isotropic {
        fn dim(&self) -> usize {
            self.dim
        }
        fn log_posterior(&self, q: &DVector<f64>) -> f64 {
            -0.5 * self.curvature * q.norm_squared()
        }
        fn grad_log_posterior(&self, q: &DVector<f64>) -> DVector<f64> {
            -self.curvature * q
        }
        fn metric(&self, _q: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(self.dim, self.dim) * self.scale
        }
        fn metric_grad(&self, _q: &DVector<f64>) -> Vec<DMatrix<f64>> {
            vec![DMatrix::zeros(self.dim, self.dim); self.dim]
        }
    }

    fn unit() -> Isotropic {
        Isotropic {
            dim: 2,
            curvature: 1.0,
            scale: 1.0,
        }
    }

    #[test]
    fn hamiltonian_at_origin_is_zero() {
        let h = hamiltonian(&unit(), &PhasePoint::from_slices(&[0.0, 0.0], &[0.0, 0.0])).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn hamiltonian_identity_metric_hand_value() {
        let h = hamiltonian(&unit(), &PhasePoint::from_slices(&[1.0, 0.0], &[0.0, 2.0])).unwrap();
        assert_relative_eq!(h, 2.5, epsilon = 1e-15);
    }

    #[test]
    fn hamiltonian_constant_metric_log_det() {
        let model = Isotropic {
            dim: 2,
            curvature: 0.0,
            scale: 2.0,
        };
        let h = hamiltonian(&model, &PhasePoint::from_slices(&[0.0, 0.0], &[0.0, 0.0])).unwrap();
        assert_relative_eq!(h, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn grad_p_identity_and_scaled() {
        let v = grad_p_hamiltonian(&unit(), &PhasePoint::from_slices(&[0.3, 0.1], &[3.0, -1.0]))
            .unwrap();
        assert_eq!(v, dvector![3.0, -1.0]);
        let scaled = Isotropic {
            dim: 2,
            curvature: 1.0,
            scale: 2.0,
        };
        let v = grad_p_hamiltonian(&scaled, &PhasePoint::from_slices(&[0.0, 0.0], &[4.0, 0.0]))
            .unwrap();
        assert_relative_eq!(v, dvector![2.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn grad_q_constant_metric_is_minus_grad_l() {
        for p in [[0.0, 0.0], [5.0, -3.0]] {
            let g = grad_q_hamiltonian(&unit(), &PhasePoint::from_slices(&[1.0, 2.0], &p)).unwrap();
            assert_relative_eq!(g, dvector![1.0, 2.0], epsilon = 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = hamiltonian(&unit(), &PhasePoint::from_slices(&[1.0], &[1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let model = Isotropic {
            dim: 1,
            curvature: 1.0,
            scale: 1.0,
        };
        let err = hamiltonian(&model, &PhasePoint::from_slices(&[f64::INFINITY], &[0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn vector_round_trip() {
        let z = PhasePoint::from_slices(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(z.to_vector(), dvector![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(PhasePoint::from_vector(&z.to_vector()), z);
    }
}
