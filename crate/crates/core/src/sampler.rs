//! Metropolis-corrected RMHMC transitions and chain execution.
//!
//! Randomness comes from ChaCha20 streams: a chain with seed `s` and stream
//! index `c` draws from `ChaCha20Rng::seed_from_u64(s)` with
//! `set_stream(c)`, so independent chains sharing a seed never overlap.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hamiltonian::{factor_metric, hamiltonian, PhasePoint, TargetModel};
use crate::integrators::{flow, IntegratorConfig, IntegratorKind, StepOutcome};

pub fn chain_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub num_samples: usize,
    pub burn_in: usize,
    pub integrator: IntegratorKind,
    pub integrator_config: IntegratorConfig,
    pub seed: u64,
    /// RNG stream index; distinct chains sharing a seed use distinct streams.
    pub stream: u64,
}

impl ChainConfig {
    pub fn new(
        integrator: IntegratorKind,
        integrator_config: IntegratorConfig,
        num_samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            num_samples,
            burn_in: 0,
            integrator,
            integrator_config,
            seed,
            stream: 0,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("num_samples must be at least 1".into()));
        }
        self.integrator_config.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    /// `num_samples × m`, one post-burn-in position per row.
    pub samples: DMatrix<f64>,
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposals: usize,
    /// Post-burn-in proposals rejected because a fixed-point solve hit its cap.
    pub rejected_for_nonconvergence: usize,
    /// Post-burn-in proposals rejected for any other numerical failure.
    pub rejected_for_numerical_failure: usize,
    pub fixed_point_iterations: usize,
    /// Seconds spent in the transition loop.
    pub wall_time: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Why a proposal was rejected without a Metropolis test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalFailure {
    NonConvergence,
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDiagnostics {
    /// `H(q, p) - H(q', p')`; `None` when integration failed.
    pub log_acceptance_ratio: Option<f64>,
    pub fixed_point_iterations: usize,
    pub failure: Option<ProposalFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub q: DVector<f64>,
    pub accepted: bool,
    pub diagnostics: TransitionDiagnostics,
}

/// `p = L ξ` with `L Lᵀ = G(q)` and `ξ` standard normal, so `p ~ Normal(0, G(q))`.
pub fn sample_momentum<M, R>(model: &M, q: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    let metric = factor_metric(model, q)?;
    let xi = DVector::from_fn(q.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(metric.lower() * xi)
}

/// The proposal `Ψ ∘ Φ`: integrate `L` steps, then flip the momentum.
pub fn propose<M: TargetModel + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    config: &IntegratorConfig,
    point: &PhasePoint,
) -> Result<StepOutcome> {
    let mut outcome = flow(model, point, config, integrator)?;
    outcome.point = outcome.point.flipped();
    Ok(outcome)
}

/// One Metropolis-corrected transition from `q`.
///
/// Errors only if the starting point cannot be evaluated; every failure
/// after the momentum draw is a rejection.
pub fn hmc_transition<M, R>(
    model: &M,
    q: &DVector<f64>,
    integrator: IntegratorKind,
    integrator_config: &IntegratorConfig,
    rng: &mut R,
) -> Result<Transition>
where
    M: TargetModel + ?Sized,
    R: RngCore + ?Sized,
{
    let p = sample_momentum(model, q, rng)?;
    let start = PhasePoint::new(q.clone(), p);
    let initial_energy = hamiltonian(model, &start)?;

    let reject = |failure, iterations| Transition {
        q: q.clone(),
        accepted: false,
        diagnostics: TransitionDiagnostics {
            log_acceptance_ratio: None,
            fixed_point_iterations: iterations,
            failure: Some(failure),
        },
    };

    let proposal = match propose(model, integrator, integrator_config, &start) {
        Ok(outcome) => outcome,
        Err(e) if e.is_nonconvergence() => return Ok(reject(ProposalFailure::NonConvergence, 0)),
        Err(_) => return Ok(reject(ProposalFailure::Numerical, 0)),
    };
    let iterations = proposal.fixed_point_iterations;
    let final_energy = match hamiltonian(model, &proposal.point) {
        Ok(h) => h,
        Err(_) => return Ok(reject(ProposalFailure::Numerical, iterations)),
    };

    let log_ratio = initial_energy - final_energy;
    let u: f64 = rng.random();
    let accepted = u.ln() < log_ratio;
    Ok(Transition {
        q: if accepted {
            proposal.point.q
        } else {
            q.clone()
        },
        accepted,
        diagnostics: TransitionDiagnostics {
            log_acceptance_ratio: Some(log_ratio),
            fixed_point_iterations: iterations,
            failure: None,
        },
    })
}

/// Runs `burn_in + num_samples` transitions and keeps the last `num_samples`.
pub fn run_chain<M: TargetModel + ?Sized>(
    model: &M,
    initial: &DVector<f64>,
    config: &ChainConfig,
) -> Result<ChainReport> {
    config.validate()?;
    if initial.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: initial.len(),
        });
    }
    hamiltonian(model, &PhasePoint::new(initial.clone(), DVector::zeros(initial.len())))?;

    let mut rng = chain_rng(config.seed, config.stream);
    let m = model.dim();
    let mut samples = DMatrix::zeros(config.num_samples, m);
    let mut current = initial.clone();
    let mut accepted = 0;
    let mut nonconvergent = 0;
    let mut numerical = 0;
    let mut iterations = 0;

    let started = Instant::now();
    for i in 0..config.burn_in + config.num_samples {
        let t = hmc_transition(
            model,
            &current,
            config.integrator,
            &config.integrator_config,
            &mut rng,
        )?;
        current = t.q;
        if i >= config.burn_in {
            let row = i - config.burn_in;
            samples.row_mut(row).copy_from(&current.transpose());
            iterations += t.diagnostics.fixed_point_iterations;
            if t.accepted {
                accepted += 1;
            }
            match t.diagnostics.failure {
                Some(ProposalFailure::NonConvergence) => nonconvergent += 1,
                Some(ProposalFailure::Numerical) => numerical += 1,
                None => {}
            }
        }
    }
    let wall_time = started.elapsed().as_secs_f64();

    Ok(ChainReport {
        samples,
        acceptance_rate: accepted as f64 / config.num_samples as f64,
        accepted,
        proposals: config.num_samples,
        rejected_for_nonconvergence: nonconvergent,
        rejected_for_numerical_failure: numerical,
        fixed_point_iterations: iterations,
        wall_time,
        seed: config.seed,
        stream: config.stream,
    })
}
