//! Synthetic labeled series: sinusoids plus AR(1) noise with injected
//! spikes, level shifts and variance bursts.
//!
//! Every anomaly acts along one per-series fault direction (a random sign
//! per channel): spikes are triangular pulses, shifts constant offsets and
//! bursts extra white noise along it.

use serde::{Deserialize, Serialize};

use crate::ndcore::{Matrix, Rng};
use crate::{Error, Result};

use super::TimeSeriesDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Triangular pulse peaking at `magnitude · noise_scale`.
    Spike,
    /// Constant offset of `magnitude`.
    LevelShift,
    /// White noise with standard deviation `magnitude · noise_scale`.
    VarianceBurst,
}

/// One planned anomaly over `[start, start + duration)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub start: usize,
    pub duration: usize,
    pub magnitude: f64,
}

impl AnomalySpec {
    pub fn end(&self) -> usize {
        self.start + self.duration
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub length: usize,
    pub channels: usize,
    pub seed: u64,
    /// Sinusoid periods in timesteps; each channel gets its own phases and amplitudes.
    pub periods: Vec<f64>,
    pub ar_coeff: f64,
    pub noise_scale: f64,
    pub anomalies: Vec<AnomalySpec>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.channels == 0 {
            return Err(Error::config("synthetic length and channels must be >= 1"));
        }
        if !(self.ar_coeff.abs() < 1.0) || !(self.noise_scale >= 0.0) {
            return Err(Error::config("need |ar_coeff| < 1 and noise_scale >= 0"));
        }
        if self.periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::config("sinusoid periods must be positive"));
        }
        let mut plan: Vec<&AnomalySpec> = self.anomalies.iter().collect();
        plan.sort_by_key(|a| a.start);
        for a in &plan {
            if a.duration == 0 || a.end() > self.length {
                return Err(Error::config(format!(
                    "anomaly [{}, {}) outside [0, {})",
                    a.start,
                    a.end(),
                    self.length
                )));
            }
            if !a.magnitude.is_finite() {
                return Err(Error::config("anomaly magnitude must be finite"));
            }
        }
        for pair in plan.windows(2) {
            if pair[1].start < pair[0].end() {
                return Err(Error::config(format!(
                    "overlapping anomalies [{}, {}) and [{}, {})",
                    pair[0].start,
                    pair[0].end(),
                    pair[1].start,
                    pair[1].end()
                )));
            }
        }
        Ok(())
    }

    /// Planned anomalous mass over the series length.
    pub fn planned_rate(&self) -> f64 {
        self.anomalies.iter().map(|a| a.duration).sum::<usize>() as f64 / self.length as f64
    }
}

/// Deterministic in the spec (including its seed).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TimeSeriesDataset> {
    spec.validate()?;
    let (t_len, c_len) = (spec.length, spec.channels);
    let mut shape_rng = Rng::with_stream(spec.seed, 0);
    let mut noise_rng = Rng::with_stream(spec.seed, 1);
    let mut anomaly_rng = Rng::with_stream(spec.seed, 2);

    // per (channel, period): amplitude and phase
    let waves: Vec<Vec<(f64, f64)>> = (0..c_len)
        .map(|_| {
            spec.periods
                .iter()
                .map(|_| {
                    (
                        shape_rng.uniform_range(0.5, 1.5),
                        shape_rng.uniform_range(0.0, std::f64::consts::TAU),
                    )
                })
                .collect()
        })
        .collect();

    let mut labels = vec![0u8; t_len];
    for a in &spec.anomalies {
        labels[a.start..a.end()].iter_mut().for_each(|y| *y = 1);
    }

    let mut values = Matrix::zeros(t_len, c_len);
    for c in 0..c_len {
        let mut ar = 0.0;
        for t in 0..t_len {
            ar = spec.ar_coeff * ar + spec.noise_scale * noise_rng.normal();
            let base: f64 = spec
                .periods
                .iter()
                .zip(&waves[c])
                .map(|(p, (amp, phase))| amp * (std::f64::consts::TAU * t as f64 / p + phase).sin())
                .sum();
            values[(t, c)] = base + ar;
        }
    }

    let signature: Vec<f64> = (0..c_len)
        .map(|_| {
            if anomaly_rng.uniform() < 0.5 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    for a in &spec.anomalies {
        for (i, t) in (a.start..a.end()).enumerate() {
            let offset = match a.kind {
                AnomalyKind::Spike => {
                    let shape = 1.0
                        - (2.0 * i as f64 - (a.duration as f64 - 1.0)).abs()
                            / (a.duration as f64 + 1.0);
                    a.magnitude * spec.noise_scale * shape
                }
                AnomalyKind::LevelShift => a.magnitude,
                AnomalyKind::VarianceBurst => a.magnitude * spec.noise_scale * anomaly_rng.normal(),
            };
            for c in 0..c_len {
                values[(t, c)] += signature[c] * offset;
            }
        }
    }

    TimeSeriesDataset::new(spec.name.clone(), values, Some(labels))
}

/// A stretch of the series, as a fraction of its length, with a target
/// anomaly density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySegment {
    pub fraction: f64,
    pub density: f64,
}

/// A family of synthetic series: one [`SyntheticSpec`] per seed, with
/// anomalies laid out according to a density profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: String,
    pub length: usize,
    pub channels: usize,
    pub periods: Vec<f64>,
    pub ar_coeff: f64,
    pub noise_scale: f64,
    pub profile: Vec<DensitySegment>,
    pub kinds: Vec<AnomalyKind>,
    pub min_duration: usize,
    pub max_duration: usize,
    pub spike_magnitude: f64,
    pub shift_magnitude: f64,
    pub burst_magnitude: f64,
}

impl SuiteSpec {
    fn magnitude(&self, kind: AnomalyKind) -> f64 {
        match kind {
            AnomalyKind::Spike => self.spike_magnitude,
            AnomalyKind::LevelShift => self.shift_magnitude,
            AnomalyKind::VarianceBurst => self.burst_magnitude,
        }
    }

    /// Lays out the anomaly plan for `seed`.
    ///
    /// Inside each profile segment, events occupy slots of length
    /// `duration / density`, each event sitting near the end of its slot, so
    /// the running anomaly rate tracks the profile from below.
    pub fn realize(&self, seed: u64) -> Result<SyntheticSpec> {
        if self.kinds.is_empty() || self.min_duration == 0 || self.min_duration > self.max_duration
        {
            return Err(Error::config(
                "suite needs kinds and 1 <= min_duration <= max_duration",
            ));
        }
        let total_fraction: f64 = self.profile.iter().map(|s| s.fraction).sum();
        if (total_fraction - 1.0).abs() > 1e-9 {
            return Err(Error::config("profile fractions must sum to 1"));
        }
        if self
            .profile
            .iter()
            .any(|s| !(s.density >= 0.0 && s.density < 1.0))
        {
            return Err(Error::config("profile densities must lie in [0, 1)"));
        }
        let mut rng = Rng::with_stream(seed, 7);
        let mut kind_idx = rng.below(self.kinds.len() as u64) as usize;
        let mut anomalies = Vec::new();
        let mut seg_start = 0.0;
        for seg in &self.profile {
            let seg_end = seg_start + seg.fraction * self.length as f64;
            if seg.density > 0.0 {
                let mut cursor = seg_start;
                loop {
                    let span = (self.max_duration - self.min_duration) as u64 + 1;
                    let dur = self.min_duration + rng.below(span) as usize;
                    let slot = (dur as f64 / seg.density).max(dur as f64 + 2.0);
                    let slack = slot - dur as f64;
                    let jitter = rng.uniform() * 0.25 * slack;
                    let start = (cursor + slot - dur as f64 - jitter).floor() as usize;
                    if (start + dur) as f64 > seg_end || start + dur >= self.length {
                        break;
                    }
                    let kind = self.kinds[kind_idx % self.kinds.len()];
                    kind_idx += 1;
                    anomalies.push(AnomalySpec {
                        kind,
                        start,
                        duration: dur,
                        magnitude: self.magnitude(kind),
                    });
                    cursor += slot;
                }
            }
            seg_start = seg_end;
        }
        // keep events maximal: drop anything touching its predecessor
        let mut kept: Vec<AnomalySpec> = Vec::with_capacity(anomalies.len());
        for a in anomalies {
            if kept.last().is_none_or(|p| a.start > p.end()) {
                kept.push(a);
            }
        }
        let spec = SyntheticSpec {
            name: format!("{}-s{seed}", self.name),
            length: self.length,
            channels: self.channels,
            seed,
            periods: self.periods.clone(),
            ar_coeff: self.ar_coeff,
            noise_scale: self.noise_scale,
            anomalies: kept,
        };
        spec.validate()?;
        Ok(spec)
    }
}
