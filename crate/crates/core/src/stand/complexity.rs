//! Operation-count model and a wall-clock probe for the forward pass.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::ndcore::{Matrix, Rng};

use super::{forward, StandConfig, StandParams};

/// Multiply-accumulate counts per forward pass over `T` timesteps.
///
/// - embed: `T·C·d`
/// - temporal: `8·T·d²·L` per direction (four gates, each with an input and
///   a recurrent `d x d` product)
/// - scoring: `T·w`, `w` the classifier width (`2d` when bidirectional)
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopEstimate {
    pub embed: u64,
    pub temporal: u64,
    pub scoring: u64,
    pub total: u64,
}

pub const LSTM_GATE_CONSTANT: u64 = 8;

pub fn flop_estimate(config: &StandConfig, steps: usize) -> FlopEstimate {
    let t = steps as u64;
    let c = config.channels as u64;
    let d = config.d_model as u64;
    let l = config.tem_layers as u64;
    let embed = if config.use_embedding { t * c * d } else { 0 };
    let temporal = if config.use_tem {
        LSTM_GATE_CONSTANT * t * d * d * l * config.directions() as u64
    } else {
        0
    };
    let scoring = t * config.encoding_width() as u64;
    FlopEstimate {
        embed,
        temporal,
        scoring,
        total: embed + temporal + scoring,
    }
}

/// Median wall time of `reps` forward passes over a random `T x C` input.
pub fn time_forward(config: &StandConfig, steps: usize, reps: usize) -> Duration {
    let mut rng = Rng::new(config.seed);
    let params = StandParams::init(config, &mut rng);
    let x = Matrix::from_fn(steps, config.channels, |_, _| rng.normal());
    let mut times: Vec<Duration> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            let out = forward(&x, &params, config).expect("valid probe input");
            std::hint::black_box(out);
            start.elapsed()
        })
        .collect();
    times.sort();
    times[times.len() / 2]
}
