//! Runs an experiment grid: one chain per cell and replication, followed by
//! fidelity measurements on probes drawn from that chain's own samples.

use anyhow::{Context, Result};
use nalgebra::DVector;
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;

use rmhmc::diagnostics::{
    effective_sample_size, energy_error_at, reversibility_violation_at, volume_violation_at, Percentiles,
};
use rmhmc::models::Bundled;
use rmhmc::sampler::{chain_rng, run_chain, sample_momentum, ChainConfig};
use rmhmc::{IntegratorConfig, IntegratorKind, PhasePoint};

use crate::config::ExperimentSpec;

/// One chain of the grid together with the RNG streams it owns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub index: usize,
    /// Position of the grid cell, shared by its replications.
    pub cell: usize,
    pub integrator: IntegratorKind,
    pub step_size: f64,
    pub num_steps: usize,
    pub replication: usize,
    pub seed: u64,
    pub chain_stream: u64,
    pub probe_stream: u64,
}

/// Grid order: integrator, then step size, then trajectory length, then
/// replication. Run `i` samples from stream `2i` and picks probes from
/// stream `2i + 1` of the base seed.
pub fn plan(spec: &ExperimentSpec) -> Result<Vec<RunPlan>> {
    let mut runs = Vec::with_capacity(spec.run_count());
    let mut cell = 0;
    for integrator in spec.integrator_kinds()? {
        for &step_size in &spec.step_sizes {
            for &num_steps in &spec.num_steps {
                for replication in 0..spec.replications {
                    let index = runs.len();
                    runs.push(RunPlan {
                        index,
                        cell,
                        integrator,
                        step_size,
                        num_steps,
                        replication,
                        seed: spec.seed,
                        chain_stream: 2 * index as u64,
                        probe_stream: 2 * index as u64 + 1,
                    });
                }
                cell += 1;
            }
        }
    }
    Ok(runs)
}

/// Fidelity percentiles at one fixed-point tolerance. Failed integrations
/// enter the percentiles as `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceFidelity {
    pub tolerance: f64,
    pub reversibility: Percentiles,
    pub volume: Percentiles,
    pub energy: Percentiles,
    pub failures: usize,
}

/// One probe measured at one tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRecord {
    pub tolerance: f64,
    pub probe: usize,
    pub reversibility: f64,
    pub volume: f64,
    pub energy: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub rejected_for_nonconvergence: usize,
    pub rejected_for_numerical_failure: usize,
    /// Per-coordinate ESS, absent when a coordinate never moved.
    pub ess: Option<DVector<f64>>,
    pub wall_time: f64,
    pub fidelity: Vec<ToleranceFidelity>,
    pub probes: Vec<ProbeRecord>,
    /// Empty when everything succeeded.
    pub notes: Vec<String>,
}

impl RunMetrics {
    pub fn mean_ess(&self) -> Option<f64> {
        self.ess.as_ref().map(|e| e.mean())
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.ess.as_ref().map(|e| e.min())
    }

    pub fn fidelity_at(&self, tolerance: f64) -> Option<&ToleranceFidelity> {
        self.fidelity.iter().find(|f| f.tolerance == tolerance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub plan: RunPlan,
    /// A chain-level failure is recorded here rather than aborting the grid.
    pub outcome: std::result::Result<RunMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub spec: ExperimentSpec,
    pub runs: Vec<RunResult>,
}

/// Runs every planned chain on a pool of `threads` workers (0 means one per
/// core). Results come back in plan order regardless of scheduling.
pub fn run_experiment(spec: &ExperimentSpec, model: &Bundled, threads: usize) -> Result<ExperimentResults> {
    spec.validate()?;
    let plans = plan(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start worker pool")?;
    let runs = pool.install(|| plans.par_iter().map(|p| execute(spec, model, p)).collect());
    Ok(ExperimentResults {
        spec: spec.clone(),
        runs,
    })
}

pub fn execute(spec: &ExperimentSpec, model: &Bundled, plan: &RunPlan) -> RunResult {
    RunResult {
        plan: *plan,
        outcome: execute_inner(spec, model, plan),
    }
}

fn integrator_config(spec: &ExperimentSpec, plan: &RunPlan, tolerance: f64) -> IntegratorConfig {
    IntegratorConfig::new(plan.step_size, plan.num_steps, tolerance).with_max_iters(spec.max_fixed_point_iters)
}

fn execute_inner(spec: &ExperimentSpec, model: &Bundled, plan: &RunPlan) -> std::result::Result<RunMetrics, String> {
    let chain = ChainConfig::new(
        plan.integrator,
        integrator_config(spec, plan, spec.sampling_tolerance),
        spec.num_samples,
        plan.seed,
    )
    .with_burn_in(spec.burn_in)
    .with_stream(plan.chain_stream);
    let report = run_chain(model, &model.initial_point(), &chain).map_err(|e| format!("chain failed: {e}"))?;

    let mut notes = Vec::new();
    let ess = match effective_sample_size(&report.samples) {
        Ok(ess) => Some(ess),
        Err(e) => {
            notes.push(format!("ess unavailable: {e}"));
            None
        }
    };

    let mut rng = chain_rng(plan.seed, plan.probe_stream);
    let n = report.samples.nrows();
    let rows: Vec<usize> = if spec.probes <= n {
        sample_indices(&mut rng, n, spec.probes).into_vec()
    } else {
        notes.push(format!("only {n} samples for {} probes; drawing with replacement", spec.probes));
        (0..spec.probes).map(|_| rand::Rng::random_range(&mut rng, 0..n)).collect()
    };
    // One momentum per probe, shared across tolerances.
    let points: Vec<Option<PhasePoint>> = rows
        .iter()
        .map(|&r| {
            let q = report.samples.row(r).transpose();
            sample_momentum(model, &q, &mut rng).ok().map(|p| PhasePoint::new(q, p))
        })
        .collect();

    let mut fidelity = Vec::new();
    let mut probes = Vec::new();
    for &tolerance in &spec.tolerances {
        let cfg = integrator_config(spec, plan, tolerance);
        let records: Vec<ProbeRecord> = points
            .iter()
            .enumerate()
            .map(|(probe, point)| measure(model, plan.integrator, &cfg, point.as_ref(), spec.fd_step, probe))
            .collect();
        if !records.is_empty() {
            let pick = |f: fn(&ProbeRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
            let percentiles = |v: Vec<f64>| Percentiles::of(&v).expect("probe values are never NaN");
            fidelity.push(ToleranceFidelity {
                tolerance,
                reversibility: percentiles(pick(|r| r.reversibility)),
                volume: percentiles(pick(|r| r.volume)),
                energy: percentiles(pick(|r| r.energy)),
                failures: records.iter().filter(|r| r.failed).count(),
            });
        }
        probes.extend(records);
    }

    Ok(RunMetrics {
        acceptance_rate: report.acceptance_rate,
        accepted: report.accepted,
        rejected_for_nonconvergence: report.rejected_for_nonconvergence,
        rejected_for_numerical_failure: report.rejected_for_numerical_failure,
        ess,
        wall_time: report.wall_time,
        fidelity,
        probes,
        notes,
    })
}

fn measure(
    model: &Bundled,
    integrator: IntegratorKind,
    cfg: &IntegratorConfig,
    point: Option<&PhasePoint>,
    fd_step: f64,
    probe: usize,
) -> ProbeRecord {
    let Some(z) = point else {
        return ProbeRecord {
            tolerance: cfg.tolerance,
            probe,
            reversibility: f64::INFINITY,
            volume: f64::INFINITY,
            energy: f64::INFINITY,
            failed: true,
        };
    };
    let r = reversibility_violation_at(model, integrator, cfg, z);
    let v = volume_violation_at(model, integrator, cfg, z, fd_step);
    let e = energy_error_at(model, integrator, cfg, z);
    ProbeRecord {
        tolerance: cfg.tolerance,
        probe,
        reversibility: r.value,
        volume: v.value,
        energy: e.value,
        failed: r.integration_failed || v.integration_failed || e.integration_failed,
    }
}
