use crate::ndcore::{Matrix, Rng};
use crate::{Error, Result};

use super::StandConfig;

/// Access to every learnable tensor in a fixed order; optimizers and
/// gradient checks are written against this.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl ParamTensors for Matrix {
    fn tensors(&self) -> Vec<&Matrix> {
        vec![self]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![self]
    }
}

/// One embedding block: affine, GELU, LayerNorm.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedLayer {
    /// `d x in`
    pub weight: Matrix,
    pub bias: Matrix,
    pub ln_gain: Matrix,
    pub ln_bias: Matrix,
}

/// LSTM weights of one direction; gate rows are ordered i, f, g, o.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// `4d x in`
    pub w_ih: Matrix,
    /// `4d x d`
    pub w_hh: Matrix,
    /// `1 x 4d`
    pub bias: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub fwd: LstmCell,
    pub bwd: Option<LstmCell>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandParams {
    pub embed: Vec<EmbedLayer>,
    pub lstm: Vec<LstmLayer>,
    /// `1 x encoding_width`
    pub classifier_weight: Matrix,
    /// `1 x 1`
    pub classifier_bias: Matrix,
}

/// Gradients share the parameter layout exactly.
pub type StandGradients = StandParams;

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.uniform_range(-bound, bound))
}

impl StandParams {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn zeros(config: &StandConfig) -> Self {
        let d = config.d_model;
        let embed = if config.use_embedding {
            (0..config.mlp_layers)
                .map(|l| {
                    let input = if l == 0 { config.channels } else { d };
                    EmbedLayer {
                        weight: Matrix::zeros(d, input),
                        bias: Matrix::zeros(1, d),
                        ln_gain: Matrix::zeros(1, d),
                        ln_bias: Matrix::zeros(1, d),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        let cell = |input: usize| LstmCell {
            w_ih: Matrix::zeros(4 * d, input),
            w_hh: Matrix::zeros(4 * d, d),
            bias: Matrix::zeros(1, 4 * d),
        };
        let lstm = if config.use_tem {
            (0..config.tem_layers)
                .map(|l| {
                    let input = config.lstm_input_width(l);
                    LstmLayer {
                        fwd: cell(input),
                        bwd: config.bidirectional.then(|| cell(input)),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        Self {
            embed,
            lstm,
            classifier_weight: Matrix::zeros(1, config.encoding_width()),
            classifier_bias: Matrix::zeros(1, 1),
        }
    }

    /// Seeded initialisation: affine and LSTM input weights uniform in
    /// ±1/sqrt(fan_in), recurrent weights uniform in ±1/sqrt(d), forget-gate
    /// bias 1, LayerNorm gain 1, other biases 0.
    pub fn init(config: &StandConfig, rng: &mut Rng) -> Self {
        let d = config.d_model;
        let mut p = Self::zeros(config);
        for layer in &mut p.embed {
            let fan_in = layer.weight.cols();
            layer.weight = uniform(d, fan_in, 1.0 / (fan_in as f64).sqrt(), rng);
            layer.ln_gain.fill(1.0);
        }
        for layer in &mut p.lstm {
            let cells = std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut());
            for cell in cells {
                let fan_in = cell.w_ih.cols();
                cell.w_ih = uniform(4 * d, fan_in, 1.0 / (fan_in as f64).sqrt(), rng);
                cell.w_hh = uniform(4 * d, d, 1.0 / (d as f64).sqrt(), rng);
                for j in d..2 * d {
                    cell.bias[(0, j)] = 1.0;
                }
            }
        }
        let width = p.classifier_weight.cols();
        p.classifier_weight = uniform(1, width, 1.0 / (width as f64).sqrt(), rng);
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    /// Tensor names in [`ParamTensors`] order.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (l, _) in self.embed.iter().enumerate() {
            for part in ["weight", "bias", "ln_gain", "ln_bias"] {
                names.push(format!("embed.{l}.{part}"));
            }
        }
        for (l, layer) in self.lstm.iter().enumerate() {
            let dirs: &[&str] = if layer.bwd.is_some() {
                &["fwd", "bwd"]
            } else {
                &["fwd"]
            };
            for dir in dirs {
                for part in ["w_ih", "w_hh", "bias"] {
                    names.push(format!("lstm.{l}.{dir}.{part}"));
                }
            }
        }
        names.push("classifier.weight".into());
        names.push("classifier.bias".into());
        names
    }

    /// Rebuilds parameters for `config` from named tensors, checking shapes.
    pub fn from_named(config: &StandConfig, tensors: &[(String, Matrix)]) -> Result<Self> {
        let mut p = Self::zeros(config);
        let names = p.names();
        if names.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                tensors.len()
            )));
        }
        for ((want, slot), (name, value)) in names.iter().zip(p.tensors_mut()).zip(tensors) {
            if want != name || slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} {:?} does not match expected {want} {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value.clone();
        }
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// `self += other` tensor by tensor.
    pub fn add_assign(&mut self, other: &StandParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale_in_place(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.as_slice())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl ParamTensors for StandParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for l in &self.embed {
            out.extend([&l.weight, &l.bias, &l.ln_gain, &l.ln_bias]);
        }
        for layer in &self.lstm {
            for cell in std::iter::once(&layer.fwd).chain(layer.bwd.as_ref()) {
                out.extend([&cell.w_ih, &cell.w_hh, &cell.bias]);
            }
        }
        out.push(&self.classifier_weight);
        out.push(&self.classifier_bias);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for l in &mut self.embed {
            out.extend([&mut l.weight, &mut l.bias, &mut l.ln_gain, &mut l.ln_bias]);
        }
        for layer in &mut self.lstm {
            for cell in std::iter::once(&mut layer.fwd).chain(layer.bwd.as_mut()) {
                out.extend([&mut cell.w_ih, &mut cell.w_hh, &mut cell.bias]);
            }
        }
        out.push(&mut self.classifier_weight);
        out.push(&mut self.classifier_bias);
        out
    }
}
