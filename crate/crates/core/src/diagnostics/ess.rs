//! Effective sample size via Geyer's initial positive sequence.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Shortest chain accepted by the estimator.
pub const MIN_ESS_LENGTH: usize = 4;

/// Per-column ESS of an `n × m` sample matrix.
pub fn effective_sample_size(samples: &DMatrix<f64>) -> Result<DVector<f64>> {
    if samples.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut out = DVector::zeros(samples.ncols());
    for j in 0..samples.ncols() {
        let column: Vec<f64> = samples.column(j).iter().copied().collect();
        out[j] = ess_1d(&column).map_err(|e| match e {
            Error::ZeroVariance { .. } => Error::ZeroVariance { coordinate: j },
            other => other,
        })?;
    }
    Ok(out)
}

/// ESS of a single series: `n / τ` with `τ = -1 + 2 Σ_k (ρ_{2k} + ρ_{2k+1})`,
/// summing pairs while they stay positive. Clamped to `[1, n]`.
pub fn ess_1d(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(Error::InvalidConfig(format!(
            "effective sample size needs at least {MIN_ESS_LENGTH} draws, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            context: "effective sample size input",
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let variance = autocov(0);
    // Rounding in the mean leaves a residue of order (ε·max|x|)² for constant input.
    let scale = series.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if variance <= (4.0 * f64::EPSILON * scale).powi(2) {
        return Err(Error::ZeroVariance { coordinate: 0 });
    }

    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / variance;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn ar1(seed: u64, n: usize, rho: f64) -> Vec<f64> {
        let noise = normals(seed, n);
        let scale = (1.0 - rho * rho).sqrt();
        let mut x = noise[0];
        let mut out = Vec::with_capacity(n);
        for e in noise {
            x = rho * x + scale * e;
            out.push(x);
        }
        out
    }

    #[test]
    fn iid_draws_have_ess_near_n() {
        let ess = ess_1d(&normals(1, 10_000)).unwrap();
        assert!((9_000.0..=11_000.0).contains(&ess), "ess {ess}");
    }

    #[test]
    fn ar1_matches_integrated_autocorrelation_time() {
        let rho = 0.9;
        let n = 100_000;
        let expected = n as f64 * (1.0 - rho) / (1.0 + rho);
        let ess = ess_1d(&ar1(2, n, rho)).unwrap();
        assert!((ess / expected - 1.0).abs() <= 0.15, "ess {ess}, expected {expected}");
    }

    #[test]
    fn constant_series_is_rejected() {
        let m = DMatrix::from_fn(10, 2, |i, j| if j == 0 { i as f64 } else { 3.0 });
        assert!(matches!(effective_sample_size(&m), Err(Error::ZeroVariance { coordinate: 1 })));
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(ess_1d(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn alternating_series_is_clamped_to_n() {
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let ess = ess_1d(&x).unwrap();
        assert!((1.0..=100.0).contains(&ess));
    }

    proptest! {
        #[test]
        fn affine_invariance(seed in 0u64..1000, scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
            let x = ar1(seed, 500, 0.5);
            let y: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let a = ess_1d(&x).unwrap();
            let b = ess_1d(&y).unwrap();
            prop_assert!((a - b).abs() <= 1e-8 * a);
        }

        #[test]
        fn within_bounds(seed in 0u64..1000, rho in -0.9f64..0.99) {
            let x = ar1(seed, 200, rho);
            let e = ess_1d(&x).unwrap();
            prop_assert!((1.0..=200.0).contains(&e));
        }
    }
}
