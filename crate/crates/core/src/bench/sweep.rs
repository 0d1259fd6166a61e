use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{DetectorEntry, ExperimentConfig};
use super::run::{run_experiment_with, Progress};
use super::table::{write_atomic, ResultsTable};
use crate::baselines::DetectorSpec;
use crate::metrics::METRIC_NAMES;
use crate::stand::StandConfig;
use crate::{Error, Result};

pub const GAIN_FILE: &str = "gain.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";

/// STAND hyperparameters of the first STAND detector in the config, or the
/// defaults.
fn base_stand(config: &ExperimentConfig) -> StandConfig {
    config
        .detectors
        .iter()
        .find_map(|d| match &d.detector {
            DetectorSpec::Stand(c) => Some(c.clone()),
            _ => None,
        })
        .unwrap_or_else(|| StandConfig::new(1))
}

fn with_subdir(config: &ExperimentConfig, name: &str) -> ExperimentConfig {
    let mut c = config.clone();
    c.output_dir = config.output_dir.join(name);
    c
}

fn aggregate_csv(
    table: &ResultsTable,
    lead: &[&str],
    row_lead: impl Fn(&str, &str) -> Vec<String>,
    metrics: &[&str],
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = lead.to_vec();
    header.extend(["metric", "n", "mean", "ci_low", "ci_high"]);
    w.write_record(&header).expect("in-memory write");
    for a in table.aggregates() {
        if !metrics.contains(&a.metric.as_str()) {
            continue;
        }
        let mut rec = row_lead(&a.detector, &a.split);
        rec.insert(0, a.dataset.clone());
        rec.extend([
            a.metric,
            a.n.to_string(),
            a.mean.to_string(),
            a.ci_low.to_string(),
            a.ci_high.to_string(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn all_metrics() -> Vec<&'static str> {
    METRIC_NAMES.iter().copied().chain(["mean"]).collect()
}

/// Every detector at every configured split threshold; STAD detectors are
/// retrained per threshold. Writes `gain.csv` (score vs. label budget)
/// next to the usual reports in `<output_dir>/gain`.
pub fn gain_sweep(
    config: &ExperimentConfig,
    progress: Progress,
) -> Result<(ResultsTable, PathBuf)> {
    let cfg = with_subdir(config, "gain");
    let table = run_experiment_with(&cfg, progress)?;
    let path = cfg.output_dir.join(GAIN_FILE);
    let text = aggregate_csv(
        &table,
        &["dataset", "detector", "threshold"],
        |det, split| vec![det.to_string(), split.to_string()],
        &all_metrics(),
    );
    write_atomic(&path, text.as_bytes())?;
    Ok((table, path))
}

pub const ABLATION_LABELS: [&str; 3] = ["stand", "stand-no-bidir", "stand-no-tem"];

/// The three encoder variants: bidirectional TEM, forward-only TEM, and
/// identity in place of the TEM.
pub fn ablation_variants(base: &StandConfig) -> Vec<DetectorEntry> {
    let full = StandConfig {
        bidirectional: true,
        use_tem: true,
        ..base.clone()
    };
    let no_bidir = StandConfig {
        bidirectional: false,
        ..full.clone()
    };
    let no_tem = StandConfig {
        bidirectional: false,
        use_tem: false,
        ..full.clone()
    };
    [full, no_bidir, no_tem]
        .into_iter()
        .zip(ABLATION_LABELS)
        .map(|(c, l)| DetectorEntry::new(l, DetectorSpec::Stand(c)))
        .collect()
}

/// Trains the three variants on identical splits and seeds. Output in
/// `<output_dir>/ablation`.
pub fn ablation_matrix(
    config: &ExperimentConfig,
    progress: Progress,
) -> Result<(ResultsTable, PathBuf)> {
    let mut cfg = with_subdir(config, "ablation");
    cfg.detectors = ablation_variants(&base_stand(config));
    let table = run_experiment_with(&cfg, progress)?;
    let path = cfg.output_dir.join(ABLATION_FILE);
    let text = aggregate_csv(
        &table,
        &["dataset", "variant", "split"],
        |det, split| vec![det.to_string(), split.to_string()],
        &all_metrics(),
    );
    write_atomic(&path, text.as_bytes())?;
    Ok((table, path))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityAxis {
    DModel,
    TemLayers,
    /// Inference and training strides follow at half the window.
    Window,
}

impl SensitivityAxis {
    pub fn name(self) -> &'static str {
        match self {
            SensitivityAxis::DModel => "d_model",
            SensitivityAxis::TemLayers => "tem_layers",
            SensitivityAxis::Window => "window",
        }
    }

    pub fn apply(self, base: &StandConfig, value: usize) -> StandConfig {
        let mut c = base.clone();
        match self {
            SensitivityAxis::DModel => c.d_model = value,
            SensitivityAxis::TemLayers => c.tem_layers = value,
            SensitivityAxis::Window => {
                c.window = value;
                c.stride = (value / 2).max(1);
                c.train_stride = (value / 2).max(1);
            }
        }
        c
    }
}

impl FromStr for SensitivityAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d_model" => Ok(SensitivityAxis::DModel),
            "tem_layers" => Ok(SensitivityAxis::TemLayers),
            "window" => Ok(SensitivityAxis::Window),
            other => Err(Error::config(format!(
                "unknown sensitivity axis `{other}` (expected d_model, tem_layers or window)"
            ))),
        }
    }
}

/// One STAND per axis value; writes `sensitivity.csv` with per-value mean
/// and 95% CI of each metric into `<output_dir>/sensitivity-<axis>`.
pub fn sensitivity_sweep(
    config: &ExperimentConfig,
    axis: SensitivityAxis,
    values: &[usize],
    progress: Progress,
) -> Result<(ResultsTable, PathBuf)> {
    if values.is_empty() {
        return Err(Error::config("sensitivity sweep needs at least one value"));
    }
    let base = base_stand(config);
    let mut cfg = with_subdir(config, &format!("sensitivity-{}", axis.name()));
    cfg.detectors = Vec::with_capacity(values.len());
    for &v in values {
        let c = axis.apply(&base, v);
        let mut probe = c.clone();
        probe.channels = probe.channels.max(1);
        probe.validate()?;
        cfg.detectors.push(DetectorEntry::new(
            format!("stand[{}={v}]", axis.name()),
            DetectorSpec::Stand(c),
        ));
    }
    let table = run_experiment_with(&cfg, progress)?;
    let path = cfg.output_dir.join(SENSITIVITY_FILE);
    let prefix = format!("stand[{}=", axis.name());
    let text = aggregate_csv(
        &table,
        &["dataset", "split", "axis", "value"],
        |det, split| {
            let value = det
                .strip_prefix(&prefix)
                .and_then(|s| s.strip_suffix(']'))
                .unwrap_or(det);
            vec![
                split.to_string(),
                axis.name().to_string(),
                value.to_string(),
            ]
        },
        &METRIC_NAMES,
    );
    write_atomic(&path, text.as_bytes())?;
    Ok((table, path))
}
