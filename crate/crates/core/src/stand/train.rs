use std::io::Write;
use std::path::Path;

use crate::data::{make_windows, reassemble, TimeSeriesDataset, WindowSet};
use crate::ndcore::{Matrix, Rng};
use crate::{Error, Result};

use super::model::{batch_loss_and_gradient, predict_logits};
use super::optim::{adam_step, gd_step, AdamState};
use super::{OptimizerKind, StandConfig, StandParams};

// RNG streams derived from the config seed
const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: StandParams,
    /// Mean batch loss per epoch.
    pub loss_history: Vec<f64>,
    pub optimizer_steps: usize,
}

/// A trained STAND detector.
#[derive(Clone, Debug, PartialEq)]
pub struct StandModel {
    pub config: StandConfig,
    pub params: StandParams,
}

/// Mini-batch training over labeled windows: `epochs` passes, windows
/// reshuffled each epoch from the seeded stream, one optimizer step per batch.
pub fn train(windows: &WindowSet, config: &StandConfig) -> Result<TrainOutcome> {
    let mut rng = Rng::with_stream(config.seed, INIT_STREAM);
    let params = StandParams::init(config, &mut rng);
    train_from(params, windows, config)
}

/// Same as [`train`], starting from the given parameters.
pub fn train_from(
    mut params: StandParams,
    windows: &WindowSet,
    config: &StandConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::config("no training windows"));
    }
    let samples: Vec<(&Matrix, &[u8])> = windows
        .windows
        .iter()
        .map(|w| {
            let y = w.labels.as_deref().ok_or_else(|| {
                Error::Contract("supervised training requires labeled windows".into())
            })?;
            Ok((&w.values, y))
        })
        .collect::<Result<_>>()?;
    if let Some((x, _)) = samples.first() {
        if x.cols() != config.channels {
            return Err(Error::config(format!(
                "windows have {} channels, config expects {}",
                x.cols(),
                config.channels
            )));
        }
    }

    let mut shuffle = Rng::with_stream(config.seed, SHUFFLE_STREAM);
    let mut adam = AdamState::new(&params);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut steps = 0usize;
    for _epoch in 0..config.epochs {
        shuffle.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Matrix, &[u8])> = chunk.iter().map(|&i| samples[i]).collect();
            let (loss, grads) = batch_loss_and_gradient(&batch, &params, config)?;
            match config.optimizer {
                OptimizerKind::Adam => {
                    adam_step(&mut params, &grads, &mut adam, config.learning_rate)
                }
                OptimizerKind::Gd => gd_step(&mut params, &grads, config.learning_rate),
            }
            if !params.is_finite() {
                return Err(Error::config("training diverged: non-finite parameters"));
            }
            epoch_loss += loss;
            batches += 1;
            steps += 1;
        }
        loss_history.push(epoch_loss / batches as f64);
    }
    Ok(TrainOutcome {
        params,
        loss_history,
        optimizer_steps: steps,
    })
}

/// Full-batch loss history of plain gradient descent from the config's
/// initialisation: entry `k` is the loss before step `k + 1`, the last entry
/// the loss after the final step.
pub fn gd_loss_trajectory(
    windows: &WindowSet,
    config: &StandConfig,
    steps: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let mut rng = Rng::with_stream(config.seed, INIT_STREAM);
    let mut params = StandParams::init(config, &mut rng);
    let batch: Vec<(&Matrix, &[u8])> = windows
        .windows
        .iter()
        .map(|w| {
            w.labels.as_deref().map(|y| (&w.values, y)).ok_or_else(|| {
                Error::Contract("supervised training requires labeled windows".into())
            })
        })
        .collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, grads) = batch_loss_and_gradient(&batch, &params, config)?;
        losses.push(loss);
        gd_step(&mut params, &grads, lr);
    }
    let (loss, _) = batch_loss_and_gradient(&batch, &params, config)?;
    losses.push(loss);
    Ok(losses)
}

impl StandModel {
    /// Trains on a labeled dataset cut into windows of `config.window`
    /// with `config.train_stride`.
    pub fn fit(ds: &TimeSeriesDataset, config: &StandConfig) -> Result<(Self, TrainOutcome)> {
        config.validate()?;
        let labels = ds.require_labels("STAND training")?;
        if ds.channels() != config.channels {
            return Err(Error::config(format!(
                "dataset has {} channels, config expects {}",
                ds.channels(),
                config.channels
            )));
        }
        let window = config.window.min(ds.len());
        let stride = config.train_stride.min(window);
        let ws = make_windows(ds.values(), Some(labels), window, stride)?;
        let outcome = train(&ws, config)?;
        Ok((
            Self {
                config: config.clone(),
                params: outcome.params.clone(),
            },
            outcome,
        ))
    }

    pub fn infer(&self, x: &Matrix) -> Result<Vec<f64>> {
        infer(x, &self.params, &self.config)
    }
}

/// Windowed forward passes averaged back onto the timeline; returns logits.
pub fn infer(x: &Matrix, params: &StandParams, config: &StandConfig) -> Result<Vec<f64>> {
    if x.cols() != config.channels {
        return Err(Error::config(format!(
            "series has {} channels, model was trained on {}",
            x.cols(),
            config.channels
        )));
    }
    if x.rows() == 0 {
        return Ok(Vec::new());
    }
    let window = config.window.min(x.rows());
    let stride = config.stride.min(window);
    let ws = make_windows(x, None, window, stride)?;
    infer_windows(&ws, params, config)
}

/// Scores every window independently and reassembles.
pub fn infer_windows(
    ws: &WindowSet,
    params: &StandParams,
    config: &StandConfig,
) -> Result<Vec<f64>> {
    let rows = crate::par::map(&ws.windows, |w| predict_logits(&w.values, params, config));
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    reassemble(ws, &rows)
}

/// Probability view of logits.
pub fn probabilities(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&s| crate::ndcore::sigmoid(s)).collect()
}

/// `epoch,mean_loss` CSV, epochs numbered from 1.
pub fn write_loss_history(history: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,mean_loss")?;
    for (i, l) in history.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, l)?;
    }
    out.flush()?;
    Ok(())
}
