//! Report files: `runs.csv` (one row per chain plus replication
//! aggregates), `probes.csv` (one row per probe and tolerance) and
//! `manifest.toml` (config echo and seeds).
//!
//! Numbers are written in Rust's shortest round-trip form, so reruns with the
//! same spec and seed produce identical bytes when timing is disabled.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentSpec;
use crate::experiment::{ExperimentResults, RunMetrics, RunResult};

pub const RUNS_FILE: &str = "runs.csv";
pub const PROBES_FILE: &str = "probes.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Columns shared by every tolerance block in `runs.csv`.
const FIDELITY_COLUMNS: [&str; 7] = [
    "volume_p10",
    "volume_median",
    "volume_p90",
    "symmetry_p10",
    "symmetry_median",
    "symmetry_p90",
    "probe_failures",
];

/// Headline columns that also get a standard-error column in aggregates.
const HEADLINE: [&str; 5] = ["acceptance", "mean_ess", "min_ess", "mean_ess_per_sec", "min_ess_per_sec"];

fn tolerance_label(t: f64) -> String {
    format!("{t:e}")
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn runs_header(spec: &ExperimentSpec) -> Vec<String> {
    let mut header: Vec<String> = ["step_size", "num_steps", "method"].map(String::from).to_vec();
    header.extend(HEADLINE.map(String::from));
    for &t in &spec.tolerances {
        header.extend(FIDELITY_COLUMNS.map(|c| format!("{c}@{}", tolerance_label(t))));
    }
    header.extend(
        [
            "tolerance",
            "seed",
            "chain_stream",
            "probe_stream",
            "replication",
            "num_samples",
            "burn_in",
            "wall_time",
            "rejected_nonconvergence",
            "rejected_numerical",
            "status",
        ]
        .map(String::from),
    );
    header.extend(HEADLINE.map(|c| format!("{c}_se")));
    header
}

/// Headline values in `HEADLINE` order; ESS/sec only with timing.
fn headline(m: &RunMetrics, timing: bool) -> [Option<f64>; 5] {
    let per_sec = |ess: Option<f64>| if timing { ess.map(|e| e / m.wall_time) } else { None };
    [
        Some(m.acceptance_rate),
        m.mean_ess(),
        m.min_ess(),
        per_sec(m.mean_ess()),
        per_sec(m.min_ess()),
    ]
}

fn fidelity_values(m: &RunMetrics, spec: &ExperimentSpec) -> Vec<Option<f64>> {
    let mut out = Vec::new();
    for &t in &spec.tolerances {
        match m.fidelity_at(t) {
            Some(f) => out.extend([
                Some(f.volume.p10),
                Some(f.volume.median),
                Some(f.volume.p90),
                Some(f.reversibility.p10),
                Some(f.reversibility.median),
                Some(f.reversibility.p90),
                Some(f.failures as f64),
            ]),
            None => out.extend([None; FIDELITY_COLUMNS.len()]),
        }
    }
    out
}

fn run_row(run: &RunResult, spec: &ExperimentSpec) -> Vec<String> {
    let p = &run.plan;
    let mut row = vec![num(p.step_size), p.num_steps.to_string(), p.integrator.as_str().to_string()];
    let metrics = run.outcome.as_ref().ok();
    match metrics {
        Some(m) => {
            row.extend(headline(m, spec.timing).map(opt));
            row.extend(fidelity_values(m, spec).into_iter().map(opt));
        }
        None => row.extend(vec![String::new(); HEADLINE.len() + FIDELITY_COLUMNS.len() * spec.tolerances.len()]),
    }
    let status = match &run.outcome {
        Ok(m) if m.notes.is_empty() => "ok".to_string(),
        Ok(m) => m.notes.join("; "),
        Err(e) => e.clone(),
    };
    row.extend([
        num(spec.sampling_tolerance),
        p.seed.to_string(),
        p.chain_stream.to_string(),
        p.probe_stream.to_string(),
        p.replication.to_string(),
        spec.num_samples.to_string(),
        spec.burn_in.to_string(),
        if spec.timing { opt(metrics.map(|m| m.wall_time)) } else { String::new() },
        metrics.map(|m| m.rejected_for_nonconvergence.to_string()).unwrap_or_default(),
        metrics.map(|m| m.rejected_for_numerical_failure.to_string()).unwrap_or_default(),
        status,
    ]);
    row.extend(vec![String::new(); HEADLINE.len()]);
    row
}

/// Mean and standard error of the mean; `None` if any value is missing.
pub fn mean_and_se(values: &[Option<f64>]) -> Option<(f64, Option<f64>)> {
    let values: Option<Vec<f64>> = values.iter().copied().collect();
    let values = values?;
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return Some((mean, None));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, Some((var / n).sqrt())))
}

/// Aggregate row for one cell: means of every numeric column with standard
/// errors for the headline columns.
fn aggregate_row(cell: &[&RunResult], spec: &ExperimentSpec) -> Vec<String> {
    let p = &cell[0].plan;
    let mut row = vec![num(p.step_size), p.num_steps.to_string(), p.integrator.as_str().to_string()];
    let metrics: Vec<Option<&RunMetrics>> = cell.iter().map(|r| r.outcome.as_ref().ok()).collect();
    let column = |f: &dyn Fn(&RunMetrics) -> Vec<Option<f64>>, j: usize| -> Vec<Option<f64>> {
        metrics.iter().map(|m| m.and_then(|m| f(m)[j])).collect()
    };
    let heads = |m: &RunMetrics| headline(m, spec.timing).to_vec();
    let mut se = Vec::new();
    for j in 0..HEADLINE.len() {
        let stat = mean_and_se(&column(&heads, j));
        row.push(opt(stat.map(|s| s.0)));
        se.push(opt(stat.and_then(|s| s.1)));
    }
    let fid = |m: &RunMetrics| fidelity_values(m, spec);
    for j in 0..FIDELITY_COLUMNS.len() * spec.tolerances.len() {
        row.push(opt(mean_and_se(&column(&fid, j)).map(|s| s.0)));
    }
    let failed = metrics.iter().filter(|m| m.is_none()).count();
    let counts = |f: fn(&RunMetrics) -> usize| {
        let total: Option<usize> = metrics.iter().map(|m| m.map(f)).sum();
        total.map(|t| num(t as f64 / cell.len() as f64)).unwrap_or_default()
    };
    let wall = if spec.timing {
        opt(mean_and_se(&metrics.iter().map(|m| m.map(|m| m.wall_time)).collect::<Vec<_>>()).map(|s| s.0))
    } else {
        String::new()
    };
    row.extend([
        num(spec.sampling_tolerance),
        p.seed.to_string(),
        String::new(),
        String::new(),
        "mean".to_string(),
        spec.num_samples.to_string(),
        spec.burn_in.to_string(),
        wall,
        counts(|m| m.rejected_for_nonconvergence),
        counts(|m| m.rejected_for_numerical_failure),
        if failed == 0 {
            format!("mean of {} replications", cell.len())
        } else {
            format!("{failed} of {} replications failed", cell.len())
        },
    ]);
    row.extend(se);
    row
}

fn runs_csv(results: &ExperimentResults) -> Result<Vec<u8>> {
    let spec = &results.spec;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(runs_header(spec))?;
    let mut start = 0;
    while start < results.runs.len() {
        let cell = results.runs[start].plan.cell;
        let end = start + results.runs[start..].iter().take_while(|r| r.plan.cell == cell).count();
        let members: Vec<&RunResult> = results.runs[start..end].iter().collect();
        for run in &members {
            w.write_record(run_row(run, spec))?;
        }
        if spec.replications > 1 {
            w.write_record(aggregate_row(&members, spec))?;
        }
        start = end;
    }
    Ok(w.into_inner()?)
}

fn probes_csv(results: &ExperimentResults) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "step_size",
        "num_steps",
        "tolerance",
        "replication",
        "probe",
        "reversibility",
        "volume",
        "energy",
        "failed",
    ])?;
    for run in &results.runs {
        let Ok(m) = &run.outcome else { continue };
        let p = &run.plan;
        for r in &m.probes {
            w.write_record([
                p.integrator.as_str().to_string(),
                num(p.step_size),
                p.num_steps.to_string(),
                num(r.tolerance),
                p.replication.to_string(),
                r.probe.to_string(),
                num(r.reversibility),
                num(r.volume),
                num(r.energy),
                r.failed.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    runs_file: &'a str,
    probes_file: &'a str,
    run_count: usize,
    config: &'a ExperimentSpec,
    runs: Vec<ManifestRun>,
}

#[derive(Serialize)]
struct ManifestRun {
    method: String,
    step_size: f64,
    num_steps: usize,
    replication: usize,
    seed: u64,
    chain_stream: u64,
    probe_stream: u64,
    status: String,
}

fn manifest(results: &ExperimentResults) -> Result<String> {
    let runs = results
        .runs
        .iter()
        .map(|r| ManifestRun {
            method: r.plan.integrator.as_str().to_string(),
            step_size: r.plan.step_size,
            num_steps: r.plan.num_steps,
            replication: r.plan.replication,
            seed: r.plan.seed,
            chain_stream: r.plan.chain_stream,
            probe_stream: r.plan.probe_stream,
            status: match &r.outcome {
                Ok(_) => "ok".to_string(),
                Err(e) => e.clone(),
            },
        })
        .collect();
    let m = Manifest {
        runs_file: RUNS_FILE,
        probes_file: PROBES_FILE,
        run_count: results.runs.len(),
        config: &results.spec,
        runs,
    };
    toml::to_string(&m).context("cannot serialize manifest")
}

/// Writes all report files into `dir`, creating it if needed.
pub fn write_reports(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let files = [
        (RUNS_FILE, runs_csv(results)?),
        (PROBES_FILE, probes_csv(results)?),
        (MANIFEST_FILE, manifest(results)?.into_bytes()),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        f.write_all(&bytes)?;
        written.push(path);
    }
    Ok(written)
}
