//! How far an approximate integrator `Φ` is from the exact properties HMC
//! relies on: reversibility under momentum negation, unit Jacobian
//! determinant, and energy conservation.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::Result;
use crate::hamiltonian::{hamiltonian, PhasePoint, TargetModel};
use crate::integrators::{flow, IntegratorConfig, IntegratorKind};
use crate::sampler::sample_momentum;

/// Default central-difference step for the Jacobian estimate.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A violation measurement. When the integrator failed, `value` is
/// infinite and `integration_failed` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub value: f64,
    pub integration_failed: bool,
}

impl Violation {
    fn ok(value: f64) -> Self {
        Self {
            value,
            integration_failed: false,
        }
    }

    fn failed() -> Self {
        Self {
            value: f64::INFINITY,
            integration_failed: true,
        }
    }

    fn from_result(r: Result<f64>) -> Self {
        match r {
            Ok(v) if v.is_finite() => Violation::ok(v),
            _ => Violation::failed(),
        }
    }
}

/// `‖z - Ψ(Φ(Ψ(Φ(z))))‖₂` for an arbitrary map.
pub fn reversibility_violation_of<F>(map: F, z: &PhasePoint) -> Result<f64>
where
    F: Fn(&PhasePoint) -> Result<PhasePoint>,
{
    let forward = map(z)?;
    let back = map(&forward.flipped())?.flipped();
    Ok(z.euclidean_distance(&back))
}

/// `|det F(z) - 1|` where column `j` of `F` is the central difference
/// `(Φ(z + η/2 e_j) - Φ(z - η/2 e_j)) / η`.
pub fn volume_violation_of<F>(map: F, z: &PhasePoint, fd_step: f64) -> Result<f64>
where
    F: Fn(&PhasePoint) -> Result<PhasePoint>,
{
    let base = z.to_vector();
    let n = base.len();
    let mut jacobian = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[j] += 0.5 * fd_step;
        minus[j] -= 0.5 * fd_step;
        let hi = map(&PhasePoint::from_vector(&plus))?.to_vector();
        let lo = map(&PhasePoint::from_vector(&minus))?.to_vector();
        jacobian.set_column(j, &((hi - lo) / fd_step));
    }
    Ok((jacobian.lu().determinant() - 1.0).abs())
}

fn integrator_map<'a, M: TargetModel + ?Sized>(
    model: &'a M,
    integrator: IntegratorKind,
    config: &'a IntegratorConfig,
) -> impl Fn(&PhasePoint) -> Result<PhasePoint> + 'a {
    move |z| flow(model, z, config, integrator).map(|o| o.point)
}

pub fn reversibility_violation_at<M: TargetModel + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    point: &PhasePoint,
) -> Violation {
    Violation::from_result(reversibility_violation_of(
        integrator_map(model, integrator, config),
        point,
    ))
}

pub fn volume_violation_at<M: TargetModel + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    point: &PhasePoint,
    fd_step: f64,
) -> Violation {
    Violation::from_result(volume_violation_of(
        integrator_map(model, integrator, config),
        point,
        fd_step,
    ))
}

/// `|H(z) - H(Φ(z))|`.
pub fn energy_error_at<M: TargetModel + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    point: &PhasePoint,
) -> Violation {
    Violation::from_result((|| {
        let end = flow(model, point, config, integrator)?.point;
        Ok((hamiltonian(model, point)? - hamiltonian(model, &end)?).abs())
    })())
}

fn with_momentum<M, R>(model: &M, q: &nalgebra::DVector<f64>, rng: &mut R) -> Result<PhasePoint>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    Ok(PhasePoint::new(q.clone(), sample_momentum(model, q, rng)?))
}

/// Draws `p ~ Normal(0, G(q))` and measures the reversibility violation.
pub fn reversibility_violation<M, R>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    q: &nalgebra::DVector<f64>,
    rng: &mut R,
) -> Result<Violation>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    let z = with_momentum(model, q, rng)?;
    Ok(reversibility_violation_at(model, integrator, config, &z))
}

/// Draws `p ~ Normal(0, G(q))` and measures the volume violation.
pub fn volume_violation<M, R>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    q: &nalgebra::DVector<f64>,
    rng: &mut R,
    fd_step: f64,
) -> Result<Violation>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    let z = with_momentum(model, q, rng)?;
    Ok(volume_violation_at(model, integrator, config, &z, fd_step))
}

/// Draws `p ~ Normal(0, G(q))` and measures the energy error after `L` steps.
pub fn energy_error<M, R>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    q: &nalgebra::DVector<f64>,
    rng: &mut R,
) -> Result<Violation>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    let z = with_momentum(model, q, rng)?;
    Ok(energy_error_at(model, integrator, config, &z))
}

/// All three measurements at one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityRecord {
    pub probe_index: usize,
    pub reversibility_violation: f64,
    pub volume_violation: f64,
    pub energy_error: f64,
}

/// A probe where some integration failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeFailure {
    pub probe_index: usize,
    pub reversibility: Violation,
    pub volume: Violation,
    pub energy: Violation,
}

/// Measures all three violations at `point` with a shared momentum.
pub fn fidelity_at<M: TargetModel + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    point: &PhasePoint,
    fd_step: f64,
    probe_index: usize,
) -> std::result::Result<FidelityRecord, ProbeFailure> {
    let reversibility = reversibility_violation_at(model, integrator, config, point);
    let volume = volume_violation_at(model, integrator, config, point, fd_step);
    let energy = energy_error_at(model, integrator, config, point);
    if reversibility.integration_failed || volume.integration_failed || energy.integration_failed {
        return Err(ProbeFailure {
            probe_index,
            reversibility,
            volume,
            energy,
        });
    }
    Ok(FidelityRecord {
        probe_index,
        reversibility_violation: reversibility.value,
        volume_violation: volume.value,
        energy_error: energy.value,
    })
}
