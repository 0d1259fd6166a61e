use serde::{Deserialize, Serialize};

use crate::ndcore::{dot, sigmoid, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogregConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LogregConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
        }
    }
}

/// Pointwise logistic regression on the channel vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LogregModel {
    pub weight: Vec<f64>,
    pub bias: f64,
}

/// Mean BCE gradient `(1/N) Σ (σ(w·x + b) − y) [x; 1]`.
pub fn logreg_gradient(x: &Matrix, labels: &[u8], weight: &[f64], bias: f64) -> (Vec<f64>, f64) {
    let n = x.rows();
    let mut gw = vec![0.0; weight.len()];
    let mut gb = 0.0;
    for t in 0..n {
        let r = sigmoid(dot(weight, x.row(t)) + bias) - labels[t] as f64;
        for (g, v) in gw.iter_mut().zip(x.row(t)) {
            *g += r * v;
        }
        gb += r;
    }
    gw.iter_mut().for_each(|g| *g /= n as f64);
    (gw, gb / n as f64)
}

impl LogregModel {
    /// Full-batch gradient descent from zero.
    pub fn fit(x: &Matrix, labels: &[u8], config: &LogregConfig) -> Result<Self> {
        if x.rows() == 0 || x.rows() != labels.len() {
            return Err(Error::config(format!(
                "logreg: {} rows for {} labels",
                x.rows(),
                labels.len()
            )));
        }
        if !(config.learning_rate > 0.0) {
            return Err(Error::config("logreg learning rate must be positive"));
        }
        let mut weight = vec![0.0; x.cols()];
        let mut bias = 0.0;
        for _ in 0..config.epochs {
            let (gw, gb) = logreg_gradient(x, labels, &weight, bias);
            for (w, g) in weight.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            bias -= config.learning_rate * gb;
        }
        Ok(Self { weight, bias })
    }

    /// Logits.
    pub fn score(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weight.len() {
            return Err(Error::Contract(format!(
                "logreg fitted on {} channels, got {}",
                self.weight.len(),
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|t| dot(&self.weight, x.row(t)) + self.bias)
            .collect())
    }
}
