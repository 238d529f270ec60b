//! Numerical-fidelity metrics and effective sample size.

mod ess;
mod fidelity;
mod summary;

pub use ess::{effective_sample_size, ess_1d, MIN_ESS_LENGTH};
pub use fidelity::{
    energy_error, energy_error_at, fidelity_at, reversibility_violation, reversibility_violation_at,
    reversibility_violation_of, volume_violation, volume_violation_at, volume_violation_of,
    FidelityRecord, ProbeFailure, Violation, DEFAULT_FD_STEP,
};
pub use summary::{median, percentile_sorted, summarize, FidelitySummary, Percentiles};
