use crate::diagnostics::fidelity::FidelityRecord;
use crate::error::{Error, Result};

/// 10th percentile, median and 90th percentile of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p10: f64,
    pub median: f64,
    pub p90: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        if sorted.is_empty() {
            return Err(Error::EmptyInput);
        }
        if sorted.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFiniteValue {
                context: "percentile input",
            });
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            p10: percentile_sorted(&sorted, 0.1),
            median: percentile_sorted(&sorted, 0.5),
            p90: percentile_sorted(&sorted, 0.9),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelitySummary {
    pub reversibility: Percentiles,
    pub volume: Percentiles,
    pub energy: Percentiles,
    pub count: usize,
}

pub fn summarize(records: &[FidelityRecord]) -> Result<FidelitySummary> {
    let pick = |f: fn(&FidelityRecord) -> f64| -> Vec<f64> { records.iter().map(f).collect() };
    Ok(FidelitySummary {
        reversibility: Percentiles::of(&pick(|r| r.reversibility_violation))?,
        volume: Percentiles::of(&pick(|r| r.volume_violation))?,
        energy: Percentiles::of(&pick(|r| r.energy_error))?,
        count: records.len(),
    })
}

/// Linear interpolation between closest ranks at position `(n - 1) q`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    // Equal neighbours short-circuit so that infinite entries stay infinite.
    if lo == hi || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Median of unsorted values.
pub fn median(values: &[f64]) -> Result<f64> {
    Ok(Percentiles::of(values)?.median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn record(i: usize, v: f64) -> FidelityRecord {
        FidelityRecord {
            probe_index: i,
            reversibility_violation: v,
            volume_violation: v,
            energy_error: v,
        }
    }

    #[test]
    fn one_to_hundred() {
        let records: Vec<_> = (1..=100).rev().map(|k| record(k, k as f64)).collect();
        let s = summarize(&records).unwrap();
        assert_relative_eq!(s.reversibility.median, 50.5, epsilon = 1e-12);
        assert_relative_eq!(s.volume.p10, 10.9, epsilon = 1e-12);
        assert_relative_eq!(s.energy.p90, 90.1, epsilon = 1e-12);
        assert_eq!(s.count, 100);
    }

    #[test]
    fn single_and_constant() {
        let s = summarize(&[record(0, 4.0)]).unwrap();
        assert_eq!(s.volume, Percentiles { p10: 4.0, median: 4.0, p90: 4.0 });
        let s = summarize(&vec![record(0, 2.5); 7]).unwrap();
        assert_eq!(s.energy, Percentiles { p10: 2.5, median: 2.5, p90: 2.5 });
    }

    #[test]
    fn failures_counted_as_infinite() {
        let inf = f64::INFINITY;
        let p = Percentiles::of(&[1.0, 2.0, inf, inf, inf]).unwrap();
        assert_relative_eq!(p.p10, 1.4, max_relative = 1e-15);
        assert_eq!(p.median, inf);
        assert_eq!(p.p90, inf);
        assert_eq!(Percentiles::of(&[1.0, inf]).unwrap().median, inf);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
    }

    proptest! {
        #[test]
        fn ordered(values in proptest::collection::vec(0.0f64..1e6, 1..200)) {
            let p = Percentiles::of(&values).unwrap();
            prop_assert!(p.p10 <= p.median && p.median <= p.p90);
        }
    }
}
