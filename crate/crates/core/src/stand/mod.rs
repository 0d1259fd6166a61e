//! The STAND detector: feature-embedding MLP, (bi)directional LSTM
//! temporal encoder and a pointwise linear scorer trained with BCE.

mod checkpoint;
mod complexity;
mod config;
mod model;
mod optim;
mod params;
mod train;

#[cfg(test)]
mod tests;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use complexity::{flop_estimate, time_forward, FlopEstimate, LSTM_GATE_CONSTANT};
pub use config::{OptimizerKind, StandConfig};
pub use model::{
    backward, batch_loss_and_gradient, bce_loss, bilstm_forward, embed_forward, forward,
    loss_and_gradient, predict_logits, score_forward, DirectionTrace, EmbedLayerTrace,
    ForwardTrace, LstmLayerTrace,
};
pub use optim::{adam_step, gd_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use params::{EmbedLayer, LstmCell, LstmLayer, ParamTensors, StandGradients, StandParams};
pub use train::{
    gd_loss_trajectory, infer, infer_windows, probabilities, train, train_from, write_loss_history,
    StandModel, TrainOutcome,
};

use crate::Result;

pub const STAND_KIND: &str = "stand";

impl StandModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let tensors = self
            .params
            .names()
            .into_iter()
            .zip(self.params.tensors().into_iter().cloned())
            .collect();
        Ok(Checkpoint::new(
            STAND_KIND,
            serde_json::to_string(&self.config)?,
            tensors,
        ))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != STAND_KIND {
            return Err(crate::Error::Checkpoint(format!(
                "expected a {STAND_KIND} checkpoint, found {}",
                ck.kind
            )));
        }
        let config: StandConfig = serde_json::from_str(&ck.config_json)?;
        config.validate()?;
        let params = StandParams::from_named(&config, &ck.tensors)?;
        Ok(Self { config, params })
    }
}
