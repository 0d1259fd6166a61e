use crate::{Error, Result};

pub(crate) fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y != 0).count();
    (pos, labels.len() - pos)
}

pub(crate) fn require_both_classes(scores: &[f64], labels: &[u8], metric: &str) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "{metric}: {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "{metric} needs both classes in the labels"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Metric(format!("{metric}: non-finite score")));
    }
    Ok(())
}

/// Indices sorted by descending score, grouped by equal score.
pub(crate) fn descending_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Point-wise F1 (0-100) from a prediction mask.
pub fn f1_score(predicted: &[bool], labels: &[u8]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in predicted.iter().zip(labels) {
        match (p, y != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    100.0 * 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Best point-wise F1 over thresholds `τ` drawn from the distinct score
/// values, predicting `score > τ`. Returns `(f1, τ)` with the smallest `τ`
/// attaining the maximum.
pub fn best_f1(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    require_both_classes(scores, labels, "best_f1")?;
    let (pos, _) = class_counts(labels);
    let groups = descending_groups(scores);
    // τ = value of group k predicts everything in groups before k
    let mut tp = 0usize;
    let mut predicted = 0usize;
    let mut best = (0.0, scores[groups[0][0]]);
    for g in &groups {
        let tau = scores[g[0]];
        let f1 = if tp == 0 {
            0.0
        } else {
            100.0 * 2.0 * tp as f64 / (predicted + pos) as f64
        };
        if f1 >= best.0 {
            best = (f1, tau);
        }
        tp += g.iter().filter(|&&i| labels[i] != 0).count();
        predicted += g.len();
    }
    Ok(best)
}

/// Mann-Whitney AUC, `(wins + ties/2) / (P·N)`, scaled to 0-100.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    require_both_classes(scores, labels, "auc_roc")?;
    let (pos, neg) = class_counts(labels);
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = idx[i..=j].iter().filter(|&&k| labels[k] != 0).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (pos as f64) * (pos as f64 + 1.0) / 2.0;
    Ok(100.0 * u / (pos as f64 * neg as f64))
}
