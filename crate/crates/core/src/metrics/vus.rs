use crate::Result;

use super::pointwise::{class_counts, descending_groups, require_both_classes};

pub const DEFAULT_MAX_BUFFER: usize = 8;

/// Relevance of each timestep for buffer `ell`: 1 inside events, decaying
/// linearly as `1 - k/(ell+1)` at distance `k <= ell` outside, else 0.
pub fn soft_labels(labels: &[u8], ell: usize) -> Vec<f64> {
    let n = labels.len();
    // distance to the nearest anomalous point, scanning both ways
    let mut dist = vec![usize::MAX; n];
    let mut last: Option<usize> = None;
    for t in 0..n {
        if labels[t] != 0 {
            last = Some(t);
        }
        if let Some(l) = last {
            dist[t] = t - l;
        }
    }
    last = None;
    for t in (0..n).rev() {
        if labels[t] != 0 {
            last = Some(t);
        }
        if let Some(l) = last {
            dist[t] = dist[t].min(l - t);
        }
    }
    dist.into_iter()
        .map(|d| {
            if d == 0 {
                1.0
            } else if d <= ell {
                1.0 - d as f64 / (ell + 1) as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// Area under the precision-recall curve with soft precision: a flagged
/// point earns its relevance, recall counts the hard labels. Thresholds are
/// the distinct scores (`score >= τ`), summed as `Σ (R_k − R_{k−1}) P_k`.
pub fn range_average_precision(scores: &[f64], labels: &[u8], relevance: &[f64]) -> f64 {
    let (pos, _) = class_counts(labels);
    let mut soft_tp = 0.0;
    let mut hard_tp = 0usize;
    let mut flagged = 0usize;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for g in descending_groups(scores) {
        for &i in &g {
            soft_tp += relevance[i];
            hard_tp += (labels[i] != 0) as usize;
        }
        flagged += g.len();
        let recall = hard_tp as f64 / pos as f64;
        let precision = soft_tp / flagged as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Mean range-AP over buffers `0..=max_buffer`, 0-100.
pub fn vus_pr(scores: &[f64], labels: &[u8], max_buffer: usize) -> Result<f64> {
    require_both_classes(scores, labels, "vus_pr")?;
    let total: f64 = (0..=max_buffer)
        .map(|ell| range_average_precision(scores, labels, &soft_labels(labels, ell)))
        .sum();
    Ok(100.0 * total / (max_buffer + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::Rng;

    /// Threshold sweep with explicit precision/recall at every distinct score.
    fn sweep_ap(scores: &[f64], labels: &[u8]) -> f64 {
        let mut cands: Vec<f64> = scores.to_vec();
        cands.sort_by(|a, b| b.total_cmp(a));
        cands.dedup();
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let mut prev_r = 0.0;
        let mut ap = 0.0;
        for tau in cands {
            let flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= tau).collect();
            let tp = flagged.iter().filter(|&&i| labels[i] == 1).count() as f64;
            let p = tp / flagged.len() as f64;
            let r = tp / pos;
            ap += (r - prev_r) * p;
            prev_r = r;
        }
        ap
    }

    #[test]
    fn soft_label_ramps() {
        let y = [0, 0, 0, 0, 1, 1, 0, 0, 0, 0];
        let s = soft_labels(&y, 2);
        let want = [
            0.0,
            0.0,
            1.0 / 3.0,
            2.0 / 3.0,
            1.0,
            1.0,
            2.0 / 3.0,
            1.0 / 3.0,
            0.0,
            0.0,
        ];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            soft_labels(&y, 0),
            y.iter().map(|&v| v as f64).collect::<Vec<_>>()
        );
    }

    #[test]
    fn perfect_scores_give_100() {
        let y = [0u8, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0];
        let s: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        for lmax in [0, 1, 4, 8] {
            assert_eq!(vus_pr(&s, &y, lmax).unwrap(), 100.0);
        }
    }

    #[test]
    fn zero_buffer_is_average_precision() {
        let mut rng = Rng::new(12);
        for _ in 0..50 {
            let mut y: Vec<u8> = (0..50).map(|_| (rng.uniform() < 0.2) as u8).collect();
            y[3] = 1;
            y[4] = 0;
            let s: Vec<f64> = (0..50).map(|_| (rng.uniform() * 10.0).floor()).collect();
            let got = vus_pr(&s, &y, 0).unwrap() / 100.0;
            assert!((got - sweep_ap(&s, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_ranker_scores_near_the_anomaly_rate() {
        let mut rng = Rng::new(13);
        let n = 10_000;
        let mut y = vec![0u8; n];
        for k in 0..50 {
            let s = k * 200 + 50;
            y[s..s + 60].iter_mut().for_each(|v| *v = 1);
        }
        let rate = 0.3;
        let mut ap0 = 0.0;
        for _ in 0..5 {
            let s: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            ap0 += vus_pr(&s, &y, 0).unwrap() / 5.0;
        }
        assert!((ap0 - 100.0 * rate).abs() < 2.0, "{ap0}");
        let s: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let buffered = vus_pr(&s, &y, DEFAULT_MAX_BUFFER).unwrap();
        assert!(
            buffered >= 100.0 * rate - 2.0 && buffered < 100.0 * rate + 10.0,
            "{buffered}"
        );
    }

    #[test]
    fn monotone_transform_invariant() {
        let mut rng = Rng::new(14);
        let y: Vec<u8> = (0..200).map(|t| ((t / 10) % 5 == 0) as u8).collect();
        let s: Vec<f64> = (0..200).map(|_| rng.normal()).collect();
        let t: Vec<f64> = s.iter().map(|v| 2.0 * v.powi(3) + 7.0).collect();
        assert_eq!(vus_pr(&s, &y, 8).unwrap(), vus_pr(&t, &y, 8).unwrap());
    }
}
