use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::DetectorSpec;
use crate::data::{
    generate_synthetic, load_csv, SuiteSpec, SyntheticSpec, TimeSeriesDataset, DEFAULT_LABEL_COLUMN,
};
use crate::metrics::{MetricConfig, ThresholdRule, DEFAULT_MAX_BUFFER, DEFAULT_MC_DRAWS};
use crate::{Error, Result};

/// Where a dataset comes from. Suites are realized once per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        /// Defaults to `label`.
        #[serde(default = "default_label_column")]
        label_column: Option<String>,
        /// Defaults to the file stem.
        #[serde(default)]
        name: Option<String>,
    },
    Synthetic {
        spec: SyntheticSpec,
    },
    Suite {
        suite: SuiteSpec,
    },
}

fn default_label_column() -> Option<String> {
    Some(DEFAULT_LABEL_COLUMN.to_string())
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Csv { path, name, .. } => name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string())
            }),
            DatasetSource::Synthetic { spec } => spec.name.clone(),
            DatasetSource::Suite { suite } => suite.name.clone(),
        }
    }

    /// Materializes the series used with `seed`.
    pub fn load(&self, seed: u64) -> Result<TimeSeriesDataset> {
        let mut ds = match self {
            DatasetSource::Csv {
                path, label_column, ..
            } => load_csv(path, label_column.as_deref())?,
            DatasetSource::Synthetic { spec } => generate_synthetic(spec)?,
            DatasetSource::Suite { suite } => generate_synthetic(&suite.realize(seed)?)?,
        };
        ds.name = self.name();
        Ok(ds)
    }
}

/// A detector column of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorEntry {
    pub label: String,
    pub detector: DetectorSpec,
}

impl DetectorEntry {
    pub fn new(label: impl Into<String>, detector: DetectorSpec) -> Self {
        Self {
            label: label.into(),
            detector,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub max_buffer: usize,
    pub mc_draws: usize,
    pub threshold: ThresholdRule,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            max_buffer: DEFAULT_MAX_BUFFER,
            mc_draws: DEFAULT_MC_DRAWS,
            threshold: ThresholdRule::BestF1,
        }
    }
}

impl MetricSettings {
    pub fn with_seed(&self, seed: u64) -> MetricConfig {
        MetricConfig {
            max_buffer: self.max_buffer,
            mc_draws: self.mc_draws,
            seed,
            threshold: self.threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub detectors: Vec<DetectorEntry>,
    /// Split thresholds, strictly increasing in (0, 1).
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub metrics: MetricSettings,
    /// Unsupervised detectors fit on the unlabeled training prefix and are
    /// scored on the evaluation segment only. When false they fit on, and
    /// are scored over, the whole series.
    #[serde(default = "default_fair_setting")]
    pub fair_setting: bool,
}

fn default_fair_setting() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.detectors.is_empty() || self.seeds.is_empty() {
            return Err(Error::config(
                "need at least one dataset, one detector and one seed",
            ));
        }
        if self.thresholds.is_empty() {
            return Err(Error::config("need at least one split threshold"));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::config("split thresholds must lie in (0, 1)"));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "split thresholds must be strictly increasing",
            ));
        }
        if self.metrics.mc_draws == 0 {
            return Err(Error::config("metrics.mc_draws must be >= 1"));
        }
        let mut labels: Vec<&str> = self.detectors.iter().map(|d| d.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("detector labels must be unique"));
        }
        let mut names: Vec<String> = self.datasets.iter().map(|d| d.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("dataset names must be unique"));
        }
        Ok(())
    }

    /// Reads and validates a JSON config. Relative paths inside it stay
    /// relative to the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        for d in &mut cfg.datasets {
            if let DatasetSource::Csv { path: p, .. } = d {
                if p.is_relative() {
                    if let Some(dir) = path.parent() {
                        *p = dir.join(&*p);
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
