//! Six-score evaluation: CCE, F1, Aff-F1, UAff-F1, AUC-ROC and VUS-PR.

mod affiliation;
mod cce;
mod events;
mod io;
mod pointwise;
mod vus;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use affiliation::{
    affiliation_f1, random_affiliation_baseline, uaff_f1, unbiased_affiliation, Affiliation,
    UnbiasedAffiliation,
};
pub use cce::{cce, min_max_normalize};
pub use events::EventSet;
pub use io::{read_report, read_scores, write_report, write_scores, write_scores_to};
pub use pointwise::{auc_roc, best_f1, f1_score};
pub use vus::{range_average_precision, soft_labels, vus_pr, DEFAULT_MAX_BUFFER};

pub const DEFAULT_MC_DRAWS: usize = 32;

/// Metric names in report column order.
pub const METRIC_NAMES: [&str; 6] = ["cce", "f1", "aff_f1", "uaff_f1", "auc_roc", "vus_pr"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
#[derive(Default)]
pub enum ThresholdRule {
    #[default]
    BestF1,
    Quantile { q: f64 },
}


#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    pub rule: ThresholdRule,
}

impl Threshold {
    pub fn select(rule: ThresholdRule, scores: &[f64], labels: &[u8]) -> Result<Self> {
        let tau = match rule {
            ThresholdRule::BestF1 => best_f1(scores, labels)?.1,
            ThresholdRule::Quantile { q } => quantile(scores, q)?,
        };
        if !tau.is_finite() {
            return Err(Error::Metric("threshold is not finite".into()));
        }
        Ok(Self { tau, rule })
    }

    pub fn predict(&self, scores: &[f64]) -> Vec<bool> {
        scores.iter().map(|&s| s > self.tau).collect()
    }
}

/// Lower empirical quantile (the `ceil(q·n)`-th smallest score).
fn quantile(scores: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || scores.is_empty() {
        return Err(Error::config(format!(
            "quantile {q} on {} scores",
            scores.len()
        )));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let k = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    Ok(s[k - 1])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Largest boundary buffer for VUS-PR.
    pub max_buffer: usize,
    /// Random predictions drawn for the UAff-F1 baseline.
    pub mc_draws: usize,
    pub seed: u64,
    #[serde(default)]
    pub threshold: ThresholdRule,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            max_buffer: DEFAULT_MAX_BUFFER,
            mc_draws: DEFAULT_MC_DRAWS,
            seed: 0,
            threshold: ThresholdRule::BestF1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cce: f64,
    pub f1: f64,
    pub aff_f1: f64,
    pub uaff_f1: f64,
    pub auc_roc: f64,
    pub vus_pr: f64,
    pub threshold: f64,
    pub aff_precision: f64,
    pub aff_recall: f64,
    #[serde(default)]
    pub detector: String,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub split: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config_hash: String,
}

impl MetricReport {
    /// The six scores in column order.
    pub fn metrics(&self) -> [f64; 6] {
        [
            self.cce,
            self.f1,
            self.aff_f1,
            self.uaff_f1,
            self.auc_roc,
            self.vus_pr,
        ]
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        METRIC_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.metrics()[i])
    }

    /// Unweighted mean of the six scores.
    pub fn mean_of_six(&self) -> f64 {
        self.metrics().iter().sum::<f64>() / 6.0
    }

    pub fn with_meta(mut self, detector: &str, dataset: &str, split: &str) -> Self {
        self.detector = detector.to_string();
        self.dataset = dataset.to_string();
        self.split = split.to_string();
        self
    }
}

/// All six metrics with one shared threshold.
pub fn evaluate(scores: &[f64], labels: &[u8], config: &MetricConfig) -> Result<MetricReport> {
    let threshold = Threshold::select(config.threshold, scores, labels)?;
    let predicted = threshold.predict(scores);
    let truth = EventSet::from_labels(labels);
    let pred_events = EventSet::from_scores(scores, threshold.tau);
    let (aff, uaff) = unbiased_affiliation(&pred_events, &truth, config.mc_draws, config.seed)?;
    let report = MetricReport {
        cce: cce(scores, labels)?,
        f1: f1_score(&predicted, labels),
        aff_f1: aff.f1,
        uaff_f1: uaff.value,
        auc_roc: auc_roc(scores, labels)?,
        vus_pr: vus_pr(scores, labels, config.max_buffer)?,
        threshold: threshold.tau,
        aff_precision: aff.precision,
        aff_recall: aff.recall,
        seed: config.seed,
        ..Default::default()
    };
    if report.metrics().iter().any(|v| !v.is_finite()) {
        return Err(Error::Metric("non-finite metric".into()));
    }
    Ok(report)
}
