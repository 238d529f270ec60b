//! Experiment specification: a TOML file plus dotted `key=value` overrides.
//!
//! Overrides are applied to the parsed TOML table before deserialization, so
//! `model.alpha=1e4` and `step_sizes=[0.05, 0.1]` behave exactly as if they
//! had been written in the file.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use rmhmc::diagnostics::DEFAULT_FD_STEP;
use rmhmc::models::{
    data, generate_banana_data, generate_logistic_data, BananaModel, Bundled, FunnelModel, GaussianModel,
    HarmonicOscillator, LogisticModel, ModelKind, BANANA_DATA_SEED, LOGISTIC_DATA_SEED,
};
use rmhmc::solver::DEFAULT_MAX_ITERS;
use rmhmc::IntegratorKind;

/// A full experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Target model and its parameters.
    pub model: ModelSpec,
    /// Integrator identifiers (`glf_a`, `glf_b`, `im_a`, `im_b`, `leapfrog`).
    pub integrators: Vec<String>,
    /// Step-size grid.
    pub step_sizes: Vec<f64>,
    /// Trajectory-length grid.
    pub num_steps: Vec<usize>,
    /// Fixed-point tolerances at which fidelity is measured.
    #[serde(default = "default_tolerances")]
    pub tolerances: Vec<f64>,
    /// Fixed-point tolerance used while sampling.
    #[serde(default = "default_sampling_tolerance")]
    pub sampling_tolerance: f64,
    /// Fixed-point iteration cap.
    #[serde(default = "default_max_iters")]
    pub max_fixed_point_iters: usize,
    /// Retained samples per chain.
    pub num_samples: usize,
    /// Discarded transitions before the retained samples.
    #[serde(default)]
    pub burn_in: usize,
    /// Independent chains per grid cell.
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Base seed; every run draws from its own stream of it.
    #[serde(default)]
    pub seed: u64,
    /// Chain samples used as fidelity probes per run.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Central-difference step for the volume diagnostic.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Write wall time and ESS/sec; disable for byte-identical reports.
    #[serde(default = "default_timing")]
    pub timing: bool,
    /// Report directory, created if missing.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Model name plus the parameters that apply to it. Unset fields take the
/// reference values listed by `list-models`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    /// Banana and synthetic logistic: number of observations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<usize>,
    /// Banana and synthetic logistic: data-generation seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    /// Banana: observation noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    /// Banana: prior scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_theta: Option<f64>,
    /// Funnel: number of `x` coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_x: Option<usize>,
    /// Funnel: SoftAbs sharpness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Logistic: CSV with feature columns and a final 0/1 label column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Synthetic logistic: number of covariates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<usize>,
    /// Gaussian: mean vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    /// Gaussian: covariance rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Oscillator: angular frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Oscillator: dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

fn default_tolerances() -> Vec<f64> {
    vec![1e-9, 1e-6, 1e-3]
}

fn default_sampling_tolerance() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_replications() -> usize {
    1
}

fn default_probes() -> usize {
    100
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

fn default_timing() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentSpec {
    /// Parses `text`, applies `overrides` in order, and validates.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).context("config is not valid TOML")?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let spec: ExperimentSpec = table.try_into().context("invalid experiment config")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text, overrides).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.integrators.is_empty() {
            bail!("integrator list is empty");
        }
        self.integrator_kinds()?;
        if self.step_sizes.is_empty() || self.num_steps.is_empty() || self.tolerances.is_empty() {
            bail!("step_sizes, num_steps and tolerances must be non-empty");
        }
        if let Some(e) = self.step_sizes.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            bail!("step size must be finite and non-negative, got {e}");
        }
        if self.num_steps.contains(&0) {
            bail!("num_steps entries must be at least 1");
        }
        let tolerances = self.tolerances.iter().chain([&self.sampling_tolerance]);
        if let Some(t) = tolerances.into_iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            bail!("tolerance must be finite and non-negative, got {t}");
        }
        if self.max_fixed_point_iters == 0 {
            bail!("max_fixed_point_iters must be at least 1");
        }
        if self.num_samples == 0 {
            bail!("num_samples must be at least 1");
        }
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            bail!("fd_step must be positive, got {}", self.fd_step);
        }
        self.model.kind()?;
        self.model.check_parameters()?;
        Ok(())
    }

    pub fn integrator_kinds(&self) -> Result<Vec<IntegratorKind>> {
        self.integrators
            .iter()
            .map(|s| s.parse::<IntegratorKind>().map_err(|e| anyhow!("{e}")))
            .collect()
    }

    /// `|integrators| × |step_sizes| × |num_steps| × replications`.
    pub fn run_count(&self) -> usize {
        self.integrators.len() * self.step_sizes.len() * self.num_steps.len() * self.replications
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("cannot serialize experiment config")
    }
}

/// Sets a dotted key in `table` from `key=value`. The value is read as a
/// TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| anyhow!("override {item:?} is not of the form key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override {item:?} has an empty key");
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("path is non-empty");
    let mut node = table;
    for part in parents {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {item:?}: {part} is not a table"))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ModelSpec {
    pub fn named(kind: ModelKind) -> Self {
        Self {
            name: kind.as_str().to_string(),
            ..Self::default()
        }
    }

    pub fn kind(&self) -> Result<ModelKind> {
        self.name.parse::<ModelKind>().map_err(|e| anyhow!("{e}"))
    }

    fn set_fields(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        let mut mark = |present: bool, name| {
            if present {
                set.push(name);
            }
        };
        mark(self.observations.is_some(), "observations");
        mark(self.data_seed.is_some(), "data_seed");
        mark(self.sigma_y.is_some(), "sigma_y");
        mark(self.sigma_theta.is_some(), "sigma_theta");
        mark(self.num_x.is_some(), "num_x");
        mark(self.alpha.is_some(), "alpha");
        mark(self.data.is_some(), "data");
        mark(self.covariates.is_some(), "covariates");
        mark(self.mean.is_some(), "mean");
        mark(self.covariance.is_some(), "covariance");
        mark(self.omega.is_some(), "omega");
        mark(self.dim.is_some(), "dim");
        set
    }

    /// Rejects parameters that do not belong to the named model.
    fn check_parameters(&self) -> Result<()> {
        let kind = self.kind()?;
        let allowed: &[&str] = match kind {
            ModelKind::Gaussian => &["mean", "covariance"],
            ModelKind::Banana => &["observations", "data_seed", "sigma_y", "sigma_theta"],
            ModelKind::Funnel => &["num_x", "alpha"],
            ModelKind::Logistic => &["data", "observations", "covariates", "data_seed"],
            ModelKind::Oscillator => &["omega", "dim"],
        };
        if let Some(bad) = self.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            bail!("parameter {bad} does not apply to the {kind} model (allowed: {})", allowed.join(", "));
        }
        if kind == ModelKind::Logistic && self.data.is_some() {
            if let Some(bad) = ["observations", "covariates", "data_seed"]
                .into_iter()
                .find(|f| self.set_fields().contains(f))
            {
                bail!("parameter {bad} only applies to synthetic logistic data, not to a data file");
            }
        }
        Ok(())
    }

    /// Builds the model, generating or loading its data.
    pub fn build(&self) -> Result<Bundled> {
        self.check_parameters()?;
        let model = match self.kind()? {
            ModelKind::Gaussian => match (&self.mean, &self.covariance) {
                (None, None) => Bundled::Gaussian(GaussianModel::reference()),
                (Some(mean), Some(rows)) => {
                    let n = mean.len();
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        bail!("gaussian covariance must be {n}×{n}");
                    }
                    let cov = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                    Bundled::Gaussian(GaussianModel::new(DVector::from_vec(mean.clone()), cov)?)
                }
                _ => bail!("gaussian mean and covariance must be given together"),
            },
            ModelKind::Banana => {
                let sigma_y = self.sigma_y.unwrap_or(2.0);
                let y = generate_banana_data(
                    self.data_seed.unwrap_or(BANANA_DATA_SEED),
                    self.observations.unwrap_or(100),
                    [0.5, 0.5f64.sqrt()],
                    sigma_y,
                )?;
                Bundled::Banana(BananaModel::new(y, sigma_y, self.sigma_theta.unwrap_or(2.0))?)
            }
            ModelKind::Funnel => {
                let reference = FunnelModel::default();
                Bundled::Funnel(FunnelModel::new(
                    self.num_x.unwrap_or(reference.num_x()),
                    self.alpha.unwrap_or(reference.alpha()),
                )?)
            }
            ModelKind::Logistic => {
                let (x, y) = match &self.data {
                    Some(path) => data::load_logistic_csv(path)?,
                    None => {
                        let k = self.covariates.unwrap_or(4);
                        // Cycles the reference coefficients for other sizes.
                        let pattern = [0.5, -1.0, 0.25, 1.0];
                        let beta = DVector::from_fn(k, |i, _| pattern[i % pattern.len()]);
                        generate_logistic_data(
                            self.data_seed.unwrap_or(LOGISTIC_DATA_SEED),
                            self.observations.unwrap_or(500),
                            k,
                            &beta,
                        )?
                    }
                };
                Bundled::Logistic(LogisticModel::new(x, y)?)
            }
            ModelKind::Oscillator => {
                let omega = self.omega.unwrap_or(1.0);
                let dim = self.dim.unwrap_or(1);
                if !(omega.is_finite() && omega > 0.0) || dim == 0 {
                    bail!("oscillator needs omega > 0 and dim ≥ 1");
                }
                Bundled::Oscillator(HarmonicOscillator::new(omega, dim))
            }
        };
        Ok(model)
    }
}
