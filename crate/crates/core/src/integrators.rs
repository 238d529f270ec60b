//! One-step maps for the non-separable Hamiltonian and a driver that chains
//! them into trajectories.
//!
//! Two implicit families are provided, each in two implementations that
//! compute the same map:
//!
//! * generalized leapfrog: [`glf_a_step`] evaluates `∇H` directly in every
//!   fixed-point iteration, [`glf_b_step`] caches the geometry at the
//!   starting position and `G(q)⁻¹ p̄` across iterations;
//! * implicit midpoint: [`im_a_step`] solves for the end point,
//!   [`im_b_step`] solves for the midpoint and finishes with an explicit
//!   Euler half step.
//!
//! [`leapfrog_step`] is the explicit Störmer–Verlet scheme, valid only for a
//! position-independent metric.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result, Stage};
use crate::hamiltonian::{
    factor_metric, grad_p_hamiltonian, grad_q_hamiltonian, hamiltonian, LocalGeometry, PhasePoint,
    TargetModel,
};
use crate::solver::{fixed_point, DEFAULT_MAX_ITERS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub num_steps: usize,
    pub tolerance: f64,
    pub max_fixed_point_iters: usize,
}

impl IntegratorConfig {
    pub fn new(step_size: f64, num_steps: usize, tolerance: f64) -> Self {
        Self {
            step_size,
            num_steps,
            tolerance,
            max_fixed_point_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn with_max_iters(mut self, max_fixed_point_iters: usize) -> Self {
        self.max_fixed_point_iters = max_fixed_point_iters;
        self
    }

    /// A zero step size is accepted and yields the identity map.
    pub fn validate(&self) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "step size must be finite and non-negative, got {}",
                self.step_size
            )));
        }
        if self.num_steps == 0 {
            return Err(Error::InvalidConfig("number of steps must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be finite and non-negative, got {}",
                self.tolerance
            )));
        }
        if self.max_fixed_point_iters == 0 {
            return Err(Error::InvalidConfig(
                "fixed-point iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub point: PhasePoint,
    /// Fixed-point iterations summed over every inner solve of the step.
    pub fixed_point_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntegratorKind {
    GlfA,
    GlfB,
    ImA,
    ImB,
    Leapfrog,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 5] = [
        IntegratorKind::GlfA,
        IntegratorKind::GlfB,
        IntegratorKind::ImA,
        IntegratorKind::ImB,
        IntegratorKind::Leapfrog,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntegratorKind::GlfA => "glf_a",
            IntegratorKind::GlfB => "glf_b",
            IntegratorKind::ImA => "im_a",
            IntegratorKind::ImB => "im_b",
            IntegratorKind::Leapfrog => "leapfrog",
        }
    }

    pub fn is_implicit_midpoint(self) -> bool {
        matches!(self, IntegratorKind::ImA | IntegratorKind::ImB)
    }

    pub fn step<M: TargetModel + ?Sized>(
        self,
        model: &M,
        point: &PhasePoint,
        config: &IntegratorConfig,
    ) -> Result<StepOutcome> {
        match self {
            IntegratorKind::GlfA => glf_a_step(model, point, config),
            IntegratorKind::GlfB => glf_b_step(model, point, config),
            IntegratorKind::ImA => im_a_step(model, point, config),
            IntegratorKind::ImB => im_b_step(model, point, config),
            IntegratorKind::Leapfrog => leapfrog_step(model, point, config),
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntegratorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown integrator `{s}`")))
    }
}

fn check_start(point: &PhasePoint, config: &IntegratorConfig) -> Result<()> {
    config.validate()?;
    if !point.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "integrator input",
        });
    }
    Ok(())
}

/// Generalized leapfrog, evaluating the Hamiltonian gradients afresh in
/// every fixed-point iteration.
pub fn glf_a_step<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    check_start(point, config)?;
    let half = 0.5 * config.step_size;
    let (q, p) = (&point.q, &point.p);

    let momentum = fixed_point(
        |p_bar| {
            let force = grad_q_hamiltonian(model, &PhasePoint::new(q.clone(), p_bar.clone()))?;
            Ok(p - force * half)
        },
        p.clone(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::MomentumSolve))?;
    let p_bar = momentum.value;

    let position = fixed_point(
        |q_new| {
            let start = grad_p_hamiltonian(model, &PhasePoint::new(q.clone(), p_bar.clone()))?;
            let end = grad_p_hamiltonian(model, &PhasePoint::new(q_new.clone(), p_bar.clone()))?;
            Ok(q + (start + end) * half)
        },
        q.clone(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::PositionSolve))?;
    let q_new = position.value;

    let force = grad_q_hamiltonian(model, &PhasePoint::new(q_new.clone(), p_bar.clone()))
        .map_err(|e| e.at_stage(Stage::MomentumUpdate))?;
    let p_new = &p_bar - force * half;

    Ok(StepOutcome {
        point: PhasePoint::new(q_new, p_new),
        fixed_point_iterations: momentum.iterations + position.iterations,
        converged: momentum.converged && position.converged,
    })
}

/// Generalized leapfrog with the position-only quantities of the momentum
/// solve (`G(q)⁻¹`, `∂G/∂q_i`, `-∂L/∂q_i + ½ tr(G⁻¹ ∂G/∂q_i)`) computed
/// once, and `G(q)⁻¹ p̄` held fixed through the position solve.
pub fn glf_b_step<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    check_start(point, config)?;
    let half = 0.5 * config.step_size;
    let (q, p) = (&point.q, &point.p);

    let geometry = LocalGeometry::at(model, q).map_err(|e| e.at_stage(Stage::MomentumSolve))?;
    let momentum = fixed_point(
        |p_bar| {
            let velocity = &geometry.inverse * p_bar;
            Ok(p - geometry.grad_q_with_velocity(&velocity) * half)
        },
        p.clone(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::MomentumSolve))?;
    let p_bar = momentum.value;

    let start_velocity = &geometry.inverse * &p_bar;
    let position = fixed_point(
        |q_new| {
            let end_velocity = factor_metric(model, q_new)?.solve(&p_bar);
            Ok(q + (&start_velocity + end_velocity) * half)
        },
        q.clone(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::PositionSolve))?;
    let q_new = position.value;

    let force = grad_q_hamiltonian(model, &PhasePoint::new(q_new.clone(), p_bar.clone()))
        .map_err(|e| e.at_stage(Stage::MomentumUpdate))?;
    let p_new = &p_bar - force * half;

    Ok(StepOutcome {
        point: PhasePoint::new(q_new, p_new),
        fixed_point_iterations: momentum.iterations + position.iterations,
        converged: momentum.converged && position.converged,
    })
}

/// Vector field `(∂H/∂p, -∂H/∂q)` at one phase point, stacked.
fn hamiltonian_flow<M: TargetModel + ?Sized>(
    model: &M,
    q: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let geometry = LocalGeometry::at(model, q)?;
    let velocity = &geometry.inverse * p;
    let force = geometry.grad_q_with_velocity(&velocity);
    Ok((velocity, -force))
}

/// Implicit midpoint, solving jointly for the end point `(q', p')` of
/// `z' = z + ε X((z + z')/2)`.
pub fn im_a_step<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    check_start(point, config)?;
    let eps = config.step_size;
    let z = point.to_vector();
    let solve = fixed_point(
        |z_new| {
            let mid = PhasePoint::from_vector(&((&z + z_new) * 0.5));
            let (dq, dp) = hamiltonian_flow(model, &mid.q, &mid.p)?;
            Ok(PhasePoint::new(&point.q + dq * eps, &point.p + dp * eps).to_vector())
        },
        z.clone(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::MidpointSolve))?;

    Ok(StepOutcome {
        point: PhasePoint::from_vector(&solve.value),
        fixed_point_iterations: solve.iterations,
        converged: solve.converged,
    })
}

/// Implicit midpoint, solving for the midpoint
/// `z̄ = z + (ε/2) X(z̄)` and completing with `z' = z̄ + (ε/2) X(z̄)`.
pub fn im_b_step<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    check_start(point, config)?;
    let half = 0.5 * config.step_size;
    let solve = fixed_point(
        |z_mid| {
            let mid = PhasePoint::from_vector(z_mid);
            let (dq, dp) = hamiltonian_flow(model, &mid.q, &mid.p)?;
            Ok(PhasePoint::new(&point.q + dq * half, &point.p + dp * half).to_vector())
        },
        point.to_vector(),
        config.tolerance,
        config.max_fixed_point_iters,
    )
    .map_err(|e| e.at_stage(Stage::MidpointSolve))?;

    let mid = PhasePoint::from_vector(&solve.value);
    let (dq, dp) =
        hamiltonian_flow(model, &mid.q, &mid.p).map_err(|e| e.at_stage(Stage::MidpointUpdate))?;
    let end = PhasePoint::new(&mid.q + dq * half, &mid.p + dp * half);
    if !end.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "midpoint update",
        }
        .at_stage(Stage::MidpointUpdate));
    }

    Ok(StepOutcome {
        point: end,
        fixed_point_iterations: solve.iterations,
        converged: solve.converged,
    })
}

/// Explicit half-kick / drift / half-kick with mass matrix `G`.
///
/// Fails with [`Error::InvalidConfig`] when `∂G/∂q` is non-zero at the
/// starting position.
pub fn leapfrog_step<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    check_start(point, config)?;
    let half = 0.5 * config.step_size;

    let geometry = LocalGeometry::at(model, &point.q).map_err(|e| e.at_stage(Stage::Explicit))?;
    if geometry.metric_grad.iter().any(|d| d.amax() != 0.0) {
        return Err(Error::InvalidConfig(
            "explicit leapfrog requires a position-independent metric".into(),
        ));
    }
    // With ∂G/∂q = 0 the force is independent of momentum.
    let p_half = &point.p - &geometry.potential_force * half;
    let q_new = &point.q + geometry.metric.solve(&p_half) * config.step_size;
    let force = grad_q_hamiltonian(model, &PhasePoint::new(q_new.clone(), p_half.clone()))
        .map_err(|e| e.at_stage(Stage::Explicit))?;
    let p_new = &p_half - force * half;
    let next = PhasePoint::new(q_new, p_new);
    if !next.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "leapfrog step",
        }
        .at_stage(Stage::Explicit));
    }
    Ok(StepOutcome {
        point: next,
        fixed_point_iterations: 0,
        converged: true,
    })
}

/// One recorded state along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub point: PhasePoint,
    pub energy: f64,
    pub fixed_point_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Outcome of the last step, with iterations summed over all steps.
    pub last: StepOutcome,
    /// One entry per step, in order.
    pub steps: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn end(&self) -> &PhasePoint {
        &self.last.point
    }
}

/// Applies `integrator` `config.num_steps` times starting from `point`,
/// recording every intermediate state and its energy.
pub fn integrate<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
    integrator: IntegratorKind,
) -> Result<Trajectory> {
    integrate_with(model, point, config, |m, z, c| integrator.step(m, z, c))
}

/// The end point of [`integrate`] without the per-step record.
pub fn flow<M: TargetModel + ?Sized>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
    integrator: IntegratorKind,
) -> Result<StepOutcome> {
    config.validate()?;
    let mut current = point.clone();
    let mut total_iterations = 0;
    for index in 0..config.num_steps {
        let outcome =
            integrator
                .step(model, &current, config)
                .map_err(|e| Error::TrajectoryFailed {
                    step: index,
                    source: Box::new(e),
                })?;
        total_iterations += outcome.fixed_point_iterations;
        current = outcome.point;
    }
    Ok(StepOutcome {
        point: current,
        fixed_point_iterations: total_iterations,
        converged: true,
    })
}

/// Trajectory driver over an arbitrary step function.
pub fn integrate_with<M, F>(
    model: &M,
    point: &PhasePoint,
    config: &IntegratorConfig,
    mut step_fn: F,
) -> Result<Trajectory>
where
    M: TargetModel + ?Sized,
    F: FnMut(&M, &PhasePoint, &IntegratorConfig) -> Result<StepOutcome>,
{
    config.validate()?;
    let mut current = point.clone();
    let mut total_iterations = 0;
    let mut steps = Vec::with_capacity(config.num_steps);
    for index in 0..config.num_steps {
        let wrap = |e: Error| Error::TrajectoryFailed {
            step: index,
            source: Box::new(e),
        };
        let outcome = step_fn(model, &current, config).map_err(wrap)?;
        total_iterations += outcome.fixed_point_iterations;
        let energy = hamiltonian(model, &outcome.point).map_err(wrap)?;
        steps.push(TrajectoryPoint {
            point: outcome.point.clone(),
            energy,
            fixed_point_iterations: outcome.fixed_point_iterations,
        });
        current = outcome.point;
    }
    Ok(Trajectory {
        last: StepOutcome {
            point: current,
            fixed_point_iterations: total_iterations,
            converged: true,
        },
        steps,
    })
}
