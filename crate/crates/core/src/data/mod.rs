//! Datasets and everything that happens to them before a detector sees them.

mod csv_io;
mod norm;
mod split;
mod synthetic;
mod window;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to, DEFAULT_LABEL_COLUMN};
pub use norm::{zscore_apply, zscore_fit, NormStats, STD_FLOOR};
pub use split::{prefix_split, SplitResult};
pub use synthetic::{
    generate_synthetic, AnomalyKind, AnomalySpec, DensitySegment, SuiteSpec, SyntheticSpec,
};
pub use window::{make_windows, reassemble, Window, WindowSet};

use serde::{Deserialize, Serialize};

use crate::ndcore::Matrix;
use crate::{Error, Result};

/// A length-T, C-channel series with optional per-timestep {0,1} labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub name: String,
    values: Matrix,
    labels: Option<Vec<u8>>,
    /// Channel names in column order.
    pub channel_names: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn new(name: impl Into<String>, values: Matrix, labels: Option<Vec<u8>>) -> Result<Self> {
        let channel_names = (0..values.cols()).map(|c| format!("c{c}")).collect();
        Self::with_channel_names(name, values, labels, channel_names)
    }

    pub fn with_channel_names(
        name: impl Into<String>,
        values: Matrix,
        labels: Option<Vec<u8>>,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if let Some(y) = &labels {
            if y.len() != values.rows() {
                return Err(Error::config(format!(
                    "label length {} does not match series length {}",
                    y.len(),
                    values.rows()
                )));
            }
            if y.iter().any(|&v| v > 1) {
                return Err(Error::config("labels must be 0 or 1"));
            }
        }
        if channel_names.len() != values.cols() {
            return Err(Error::config(
                "channel name count does not match channel count",
            ));
        }
        Ok(Self {
            name: name.into(),
            values,
            labels,
            channel_names,
        })
    }

    /// Series length T.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel count C.
    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Labels or a contract error naming the caller.
    pub fn require_labels(&self, who: &str) -> Result<&[u8]> {
        self.labels().ok_or_else(|| {
            Error::Contract(format!(
                "{who} requires per-timestep labels but dataset '{}' has none",
                self.name
            ))
        })
    }

    pub fn anomaly_rate(&self) -> Option<f64> {
        let y = self.labels()?;
        if y.is_empty() {
            return Some(0.0);
        }
        Some(y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64)
    }

    /// Timesteps `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesDataset {
        TimeSeriesDataset {
            name: self.name.clone(),
            values: self.values.slice_rows(start, end),
            labels: self.labels.as_ref().map(|y| y[start..end].to_vec()),
            channel_names: self.channel_names.clone(),
        }
    }

    pub fn without_labels(&self) -> TimeSeriesDataset {
        TimeSeriesDataset {
            labels: None,
            ..self.clone()
        }
    }

    pub(crate) fn with_values(&self, values: Matrix) -> TimeSeriesDataset {
        TimeSeriesDataset {
            values,
            ..self.clone()
        }
    }
}

impl TimeSeriesDataset {
    /// Windows over this dataset's values and labels.
    pub fn windows(&self, window: usize, stride: usize) -> Result<WindowSet> {
        make_windows(&self.values, self.labels(), window, stride)
    }
}
