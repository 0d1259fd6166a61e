use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    /// Plain gradient descent.
    Gd,
}

/// Architecture and training hyperparameters of a STAND model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandConfig {
    /// Input channels C.
    pub channels: usize,
    pub d_model: usize,
    pub mlp_layers: usize,
    pub tem_layers: usize,
    pub bidirectional: bool,
    pub use_embedding: bool,
    pub use_tem: bool,
    /// Window length W used for training and inference.
    pub window: usize,
    /// Stride between inference windows.
    pub stride: usize,
    /// Stride between training windows.
    pub train_stride: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl StandConfig {
    /// Defaults: W = 32, one bidirectional layer, d_model = 64, Adam.
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            d_model: 64,
            mlp_layers: 2,
            tem_layers: 1,
            bidirectional: true,
            use_embedding: true,
            use_tem: true,
            window: 32,
            stride: 16,
            train_stride: 16,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::config(format!("invalid STAND config: {m}")));
        if self.channels == 0 {
            return fail("channels must be >= 1");
        }
        if self.d_model == 0 {
            return fail("d_model must be >= 1");
        }
        if self.tem_layers == 0 {
            return fail("tem_layers must be >= 1");
        }
        if self.use_embedding && self.mlp_layers == 0 {
            return fail("mlp_layers must be >= 1 when the embedding is enabled");
        }
        if self.window < 2 {
            return fail("window must be >= 2");
        }
        if self.stride == 0
            || self.stride > self.window
            || self.train_stride == 0
            || self.train_stride > self.window
        {
            return fail("strides must lie in [1, window]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        Ok(())
    }

    pub(crate) fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of the embedding output (input width when bypassed).
    pub fn embed_width(&self) -> usize {
        if self.use_embedding {
            self.d_model
        } else {
            self.channels
        }
    }

    /// Width of the encoder output seen by the classifier.
    pub fn encoding_width(&self) -> usize {
        if self.use_tem {
            self.d_model * self.directions()
        } else {
            self.embed_width()
        }
    }

    pub(crate) fn lstm_input_width(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed_width()
        } else {
            self.d_model * self.directions()
        }
    }
}
