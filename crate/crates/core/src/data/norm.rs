use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ndcore::Matrix;
use crate::{Error, Result};

use super::TimeSeriesDataset;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel mean and (population) standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn zscore_fit(ds: &TimeSeriesDataset, segment: Range<usize>) -> Result<NormStats> {
    if segment.is_empty() || segment.end > ds.len() {
        return Err(Error::config(format!(
            "normalisation segment {segment:?} is empty or outside [0, {})",
            ds.len()
        )));
    }
    let x = ds.values();
    let n = segment.len() as f64;
    let mut mean = Vec::with_capacity(ds.channels());
    let mut std = Vec::with_capacity(ds.channels());
    for c in 0..ds.channels() {
        let first = x[(segment.start, c)];
        let constant = segment.clone().all(|t| x[(t, c)] == first);
        if constant {
            mean.push(first);
            std.push(STD_FLOOR);
            continue;
        }
        let m = segment.clone().map(|t| x[(t, c)]).sum::<f64>() / n;
        let var = segment
            .clone()
            .map(|t| (x[(t, c)] - m).powi(2))
            .sum::<f64>()
            / n;
        mean.push(m);
        std.push(var.sqrt().max(STD_FLOOR));
    }
    Ok(NormStats { mean, std })
}

pub fn zscore_apply(ds: &TimeSeriesDataset, stats: &NormStats) -> Result<TimeSeriesDataset> {
    if stats.mean.len() != ds.channels() {
        return Err(Error::config(format!(
            "normalisation stats have {} channels, dataset has {}",
            stats.mean.len(),
            ds.channels()
        )));
    }
    let x = ds.values();
    let values = Matrix::from_fn(ds.len(), ds.channels(), |t, c| {
        (x[(t, c)] - stats.mean[c]) / stats.std[c]
    });
    Ok(ds.with_values(values))
}
