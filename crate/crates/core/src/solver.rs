//! Fixed-point iteration for `z = f(z)`.
//!
//! The loop runs while the max-norm change between successive iterates
//! exceeds the tolerance. A tolerance of zero therefore means "iterate to
//! stagnation": the loop stops only when an application of `f` leaves every
//! coordinate bit-for-bit unchanged, or when the iteration cap is reached.

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub value: DVector<f64>,
    /// Number of applications of `f`.
    pub iterations: usize,
    /// Max-norm change produced by the last application.
    pub final_delta: f64,
    pub converged: bool,
}

/// Iterates `z ← f(z)` from `initial` until `max_i |Δz_i| ≤ tolerance`.
///
/// `f` is applied at least once. Hitting `max_iters` with the change still
/// above tolerance yields [`Error::NonConvergence`], which carries the last
/// iterate. A non-finite iterate yields [`Error::NonFiniteValue`].
pub fn fixed_point<F>(
    mut f: F,
    initial: DVector<f64>,
    tolerance: f64,
    max_iters: usize,
) -> Result<FixedPointResult>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "fixed-point tolerance must be non-negative, got {tolerance}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::InvalidConfig(
            "fixed-point iteration cap must be at least 1".into(),
        ));
    }

    let mut current = initial;
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while delta > tolerance {
        if iterations == max_iters {
            return Err(Error::NonConvergence {
                iterations,
                final_delta: delta,
                partial: current,
            });
        }
        let next = f(&current)?;
        if next.len() != current.len() {
            return Err(Error::DimensionMismatch {
                expected: current.len(),
                actual: next.len(),
            });
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: "fixed-point iterate",
            });
        }
        delta = (&next - &current).amax();
        current = next;
        iterations += 1;
    }

    Ok(FixedPointResult {
        value: current,
        iterations,
        final_delta: delta,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix};
    use proptest::prelude::*;

    #[test]
    fn halving_map_converges_after_twenty_applications() {
        // Δz after k applications is 2^-k; 2^-20 ≈ 9.54e-7 is the first ≤ 1e-6.
        let r = fixed_point(|z| Ok(z / 2.0), dvector![1.0], 1e-6, 100).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 20);
        assert_eq!(r.value[0], 2f64.powi(-20));
        assert!(r.value[0] <= 2e-6);
        assert_eq!(r.final_delta, 2f64.powi(-20));
    }

    #[test]
    fn constant_map_needs_two_applications() {
        let c = dvector![3.0, -1.5];
        let r = fixed_point(|_| Ok(c.clone()), dvector![0.0, 0.0], 1e-12, 100).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 2);
        assert_eq!(r.value, c);
        assert_eq!(r.final_delta, 0.0);
    }

    #[test]
    fn zero_tolerance_stops_on_stagnation() {
        let c = dvector![0.25];
        let r = fixed_point(|_| Ok(c.clone()), dvector![1.0], 0.0, 10).unwrap();
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn expansive_map_fails() {
        let err = fixed_point(|z| Ok(z * 2.0), dvector![1.0], 1e-6, 50).unwrap_err();
        match err {
            Error::NonConvergence {
                iterations,
                final_delta,
                partial,
            } => {
                assert_eq!(iterations, 50);
                assert_eq!(final_delta, 2f64.powi(49));
                assert_eq!(partial[0], 2f64.powi(50));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overflowing_map_reports_non_finite() {
        let err = fixed_point(|z| Ok(z * 1e200), dvector![1e200], 1e-6, 50).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn zero_step_map_is_immediate() {
        let r = fixed_point(|z| Ok(z.clone()), dvector![1.0, 2.0], 1e-9, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.value, dvector![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            fixed_point(|z| Ok(z.clone()), dvector![1.0], -1.0, 10),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            fixed_point(|z| Ok(z.clone()), dvector![1.0], 1e-6, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn inner_errors_propagate() {
        let err = fixed_point(
            |_| Err(Error::MetricNotPositiveDefinite),
            dvector![1.0],
            1e-6,
            10,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MetricNotPositiveDefinite));
    }

    // Linear contraction z ↦ A z + b scaled so that ‖A‖∞ = lipschitz.
    fn contraction(raw: &DMatrix<f64>, lipschitz: f64) -> DMatrix<f64> {
        let norm = raw
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        raw * (lipschitz / norm)
    }

    proptest! {
        #[test]
        fn residual_bound_for_linear_contractions(
            entries in proptest::collection::vec(-1.0f64..1.0, 9),
            offset in proptest::collection::vec(-5.0f64..5.0, 3),
            lipschitz in 0.05f64..0.9,
            tol_exp in 3i32..10,
        ) {
            let raw = DMatrix::from_row_slice(3, 3, &entries);
            prop_assume!(raw.amax() > 1e-3);
            let a = contraction(&raw, lipschitz);
            let b = DVector::from_vec(offset);
            let tol = 10f64.powi(-tol_exp);
            let f = |z: &DVector<f64>| Ok(&a * z + &b);
            let r = fixed_point(f, DVector::zeros(3), tol, 10_000).unwrap();
            let residual = (&r.value - (&a * &r.value + &b)).amax();
            // ‖z* - f(z*)‖∞ ≤ L·δ/(1-L), plus rounding headroom.
            prop_assert!(residual <= lipschitz * tol / (1.0 - lipschitz) + 1e-12);
            prop_assert!(r.final_delta <= tol);
        }

        #[test]
        fn deterministic(seed in proptest::collection::vec(-2.0f64..2.0, 2)) {
            let a = dmatrix![0.3, -0.2; 0.1, 0.4];
            let run = || fixed_point(|z| Ok(&a * z + dvector![1.0, -1.0]), DVector::from_vec(seed.clone()), 1e-12, 1000).unwrap();
            let (x, y) = (run(), run());
            prop_assert_eq!(x.value.as_slice(), y.value.as_slice());
            prop_assert_eq!(x.iterations, y.iterations);
        }
    }
}
