use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::TimeSeriesDataset;

/// Outcome of the labeled-prefix split: `[0, train_end)` trains,
/// `[train_end, T)` evaluates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub threshold: f64,
    pub train_end: usize,
    pub train_rate: f64,
    pub remaining_rate: f64,
    pub total_len: usize,
}

impl SplitResult {
    pub fn train_len(&self) -> usize {
        self.train_end
    }

    pub fn remaining_len(&self) -> usize {
        self.total_len - self.train_end
    }
}

/// Smallest prefix whose anomaly rate reaches `threshold` without ending
/// inside an anomaly event.
///
/// A cut at `t` is allowed when `y[t-1]` or `y[t]` is normal, i.e. `t`
/// sits at an event end or inside a normal run.
pub fn prefix_split(ds: &TimeSeriesDataset, threshold: f64) -> Result<SplitResult> {
    let y = ds.require_labels("prefix_split")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Split(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    if !y.contains(&1) {
        return Err(Error::Split(format!(
            "dataset '{}' contains no anomaly events",
            ds.name
        )));
    }
    let total = y.len();
    let mut anomalies = 0usize;
    for t in 1..total {
        anomalies += y[t - 1] as usize;
        let cuts_event = y[t - 1] == 1 && y[t] == 1;
        if !cuts_event && anomalies as f64 >= threshold * t as f64 {
            let rest: usize = y[t..].iter().map(|&v| v as usize).sum();
            return Ok(SplitResult {
                threshold,
                train_end: t,
                train_rate: anomalies as f64 / t as f64,
                remaining_rate: rest as f64 / (total - t) as f64,
                total_len: total,
            });
        }
    }
    Err(Error::Split(format!(
        "no prefix of '{}' reaches anomaly rate {threshold}",
        ds.name
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::{Matrix, Rng};
    use proptest::prelude::*;

    fn labeled(y: &[u8]) -> TimeSeriesDataset {
        TimeSeriesDataset::new("s", Matrix::zeros(y.len(), 1), Some(y.to_vec())).unwrap()
    }

    /// Exhaustive scan: recompute every prefix rate from scratch and test
    /// event cuts against the explicit event list.
    fn oracle(y: &[u8], threshold: f64) -> Option<usize> {
        let mut events = Vec::new();
        let mut t = 0;
        while t < y.len() {
            if y[t] == 1 {
                let s = t;
                while t < y.len() && y[t] == 1 {
                    t += 1;
                }
                events.push((s, t));
            } else {
                t += 1;
            }
        }
        (1..y.len()).find(|&t| {
            let count = y[..t].iter().filter(|&&v| v == 1).count();
            let rate = count as f64 / t as f64;
            let cut = events.iter().any(|&(s, e)| s < t && t < e);
            rate >= threshold && !cut
        })
    }

    #[test]
    fn documented_example() {
        let r = prefix_split(&labeled(&[0, 0, 1, 1, 0, 0]), 0.30).unwrap();
        assert_eq!(r.train_end, 4);
        assert!((r.train_rate - 0.5).abs() < 1e-15);
        assert_eq!(r.remaining_rate, 0.0);
        assert_eq!(oracle(&[0, 0, 1, 1, 0, 0], 0.30), Some(4));
    }

    #[test]
    fn boundary_is_inclusive() {
        // prefix [0,0,1,1] has rate exactly 0.5
        let y = [0, 0, 1, 1, 0, 0, 1, 0];
        assert_eq!(prefix_split(&labeled(&y), 0.5).unwrap().train_end, 4);
        assert_eq!(
            prefix_split(&labeled(&y), 0.5 - 1e-12).unwrap().train_end,
            4
        );
    }

    #[test]
    fn error_paths() {
        let unl = TimeSeriesDataset::new("u", Matrix::zeros(4, 1), None).unwrap();
        assert!(matches!(prefix_split(&unl, 0.1), Err(Error::Contract(_))));
        assert!(matches!(
            prefix_split(&labeled(&[0, 0, 0]), 0.1),
            Err(Error::Split(_))
        ));
        assert!(matches!(
            prefix_split(&labeled(&[0, 0, 0, 1]), 0.5),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn randomized_suite_matches_oracle() {
        let mut rng = Rng::new(77);
        for _ in 0..300 {
            let n = 2 + rng.below(60) as usize;
            let p = rng.uniform_range(0.05, 0.6);
            let y: Vec<u8> = (0..n).map(|_| (rng.uniform() < p) as u8).collect();
            let threshold = rng.uniform_range(0.01, 0.9);
            let ds = labeled(&y);
            match (prefix_split(&ds, threshold), oracle(&y, threshold)) {
                (Ok(r), Some(t)) => {
                    assert_eq!(r.train_end, t);
                    assert!(r.train_rate >= threshold);
                    assert!(!(y[t - 1] == 1 && y[t] == 1));
                }
                (Err(_), None) => {}
                (a, b) => panic!("mismatch {a:?} vs {b:?} on {y:?} @ {threshold}"),
            }
        }
    }

    proptest! {
        #[test]
        fn feasible_sets_shrink_with_threshold(
            y in proptest::collection::vec(0u8..2, 2..80),
            lo in 0.01f64..0.9,
            delta in 0.0f64..0.5,
        ) {
            let hi = (lo + delta).min(0.99);
            let ds = labeled(&y);
            if let Ok(high) = prefix_split(&ds, hi) {
                let low = prefix_split(&ds, lo).expect("lower threshold feasible");
                prop_assert!(low.train_end <= high.train_end);
            }
        }
    }
}
