use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which implicit or explicit stage of an integrator step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Implicit half-step momentum solve of the generalized leapfrog.
    MomentumSolve,
    /// Implicit position solve of the generalized leapfrog.
    PositionSolve,
    /// Explicit closing momentum update of the generalized leapfrog.
    MomentumUpdate,
    /// Joint implicit solve of the implicit midpoint rule.
    MidpointSolve,
    /// Explicit Euler completion of the midpoint-first variant.
    MidpointUpdate,
    /// Any stage of the explicit leapfrog.
    Explicit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::MomentumSolve => "momentum solve",
            Stage::PositionSolve => "position solve",
            Stage::MomentumUpdate => "momentum update",
            Stage::MidpointSolve => "midpoint solve",
            Stage::MidpointUpdate => "midpoint update",
            Stage::Explicit => "explicit leapfrog",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not positive definite")]
    MetricNotPositiveDefinite,

    #[error("metric is not symmetric (max asymmetry {asymmetry:e})")]
    MetricNotSymmetric { asymmetry: f64 },

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: &'static str },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {final_delta:e})")]
    NonConvergence {
        iterations: usize,
        final_delta: f64,
        partial: DVector<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("coordinate {coordinate} has zero variance")]
    ZeroVariance { coordinate: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("eigendecomposition failed")]
    EigendecompositionFailure,

    #[error("{stage} failed: {source}")]
    StepFailed {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("integration failed at step {step}: {source}")]
    TrajectoryFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("data import: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Error {
        Error::StepFailed {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping stage and trajectory tags.
    pub fn root_cause(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } | Error::TrajectoryFailed { source, .. } => {
                source.root_cause()
            }
            other => other,
        }
    }

    /// True when the root cause is a fixed-point solve that hit its cap.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(self.root_cause(), Error::NonConvergence { .. })
    }
}

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue { context })
    }
}
