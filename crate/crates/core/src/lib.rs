//! Riemannian manifold Hamiltonian Monte Carlo with pluggable implicit
//! integrators.
//!
//! The crate provides the Hamiltonian `H(q, p) = -L(q) + ½ pᵀG⁻¹p + ½ log det G`
//! for any [`TargetModel`], two generalized-leapfrog and two implicit-midpoint
//! integrators built on a shared [`solver::fixed_point`] iteration, a
//! Metropolis-corrected sampler, fidelity diagnostics and a set of bundled
//! analytic models.
//!
//! ```
//! use rmhmc::{integrators::{flow, IntegratorConfig, IntegratorKind}, models::HarmonicOscillator, PhasePoint};
//!
//! let model = HarmonicOscillator::default();
//! let start = PhasePoint::from_slices(&[1.0], &[0.0]);
//! let config = IntegratorConfig::new(0.1, 10, 1e-12);
//! let end = flow(&model, &start, &config, IntegratorKind::ImA).unwrap();
//! assert!((end.point.q[0].hypot(end.point.p[0]) - 1.0).abs() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod counting;
pub mod diagnostics;
pub mod error;
pub mod hamiltonian;
pub mod integrators;
pub mod linalg;
pub mod models;
pub mod sampler;
pub mod solver;

pub use error::{Error, Result, Stage};
pub use hamiltonian::{
    factor_metric, grad_p_hamiltonian, grad_q_hamiltonian, hamiltonian, LocalGeometry, PhasePoint,
    TargetModel,
};
pub use integrators::{IntegratorConfig, IntegratorKind};
pub use linalg::SpdMatrix;
pub use sampler::{run_chain, ChainConfig, ChainReport};
