use crate::Result;

use super::pointwise::{auc_roc, require_both_classes};

/// Min-max scaling to [0, 1]; a constant sequence maps to 0.5.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// Confidence-consistency score: `100 · A · G`.
///
/// `A = 2·AUC − 1` measures global agreement (0 for a random ranking).
/// `G = 1 − mean_r(2·sd_r)` over the maximal constant-label runs `r`, with
/// `sd_r` the population standard deviation of the min-max normalised
/// scores inside the run, clamped to [0, 1].
pub fn cce(scores: &[f64], labels: &[u8]) -> Result<f64> {
    require_both_classes(scores, labels, "cce")?;
    let agreement = 2.0 * auc_roc(scores, labels)? / 100.0 - 1.0;
    let norm = min_max_normalize(scores);
    let mut spread_sum = 0.0;
    let mut runs = 0usize;
    let mut start = 0;
    while start < labels.len() {
        let mut end = start + 1;
        while end < labels.len() && labels[end] == labels[start] {
            end += 1;
        }
        let run = &norm[start..end];
        let n = run.len() as f64;
        let mean = run.iter().sum::<f64>() / n;
        let sd = (run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        spread_sum += 2.0 * sd;
        runs += 1;
        start = end;
    }
    let consistency = (1.0 - spread_sum / runs as f64).clamp(0.0, 1.0);
    Ok(100.0 * agreement * consistency)
}
