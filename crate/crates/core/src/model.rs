//! Deep ReLU multilayer perceptron with hand-written forward and backward
//! passes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{he_normal_init, softmax_rows, Matrix, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_width: usize,
    /// Number of hidden layers; 0 gives a single linear layer.
    pub depth: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if self.depth > 0 && self.hidden_width == 0 {
            return Err(Error::config("hidden_width must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        Ok(())
    }

    /// Widths at every layer boundary, input first, classes last.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.depth + 2);
        w.push(self.input_dim);
        w.extend(std::iter::repeat_n(self.hidden_width, self.depth));
        w.push(self.num_classes);
        w
    }
}

/// One affine layer: `out = in · weights + bias`, weights shaped (fan_in, fan_out).
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    /// Weights (row-major) then biases, as one index space.
    pub fn parameter(&self, index: usize) -> f64 {
        let n_w = self.weights.as_slice().len();
        if index < n_w {
            self.weights.as_slice()[index]
        } else {
            self.bias[index - n_w]
        }
    }

    pub fn len(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    config: ModelConfig,
    layers: Vec<Layer>,
}

/// Values kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub inputs: Matrix,
    /// Affine outputs of every hidden layer, before ReLU.
    pub pre_activations: Vec<Matrix>,
    /// ReLU outputs of every hidden layer.
    pub activations: Vec<Matrix>,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// Parameter gradients, laid out like [`MlpModel::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// He-normal weights with fan_in equal to each layer's input width; zero biases.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let layers = config
            .widths()
            .windows(2)
            .map(|w| Layer {
                weights: he_normal_init(&mut rng, w[0], w[1]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(MlpModel { config, layers })
    }

    /// Model with caller-supplied parameters; shapes must match the config.
    pub fn from_layers(config: ModelConfig, layers: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        let widths = config.widths();
        if layers.len() != widths.len() - 1 {
            return Err(Error::config(format!(
                "config implies {} layers, got {}",
                widths.len() - 1,
                layers.len()
            )));
        }
        for (i, (layer, w)) in layers.iter().zip(widths.windows(2)).enumerate() {
            if layer.weights.shape() != (w[0], w[1]) || layer.bias.len() != w[1] {
                return Err(Error::config(format!(
                    "layer {i}: expected {}x{} weights and {} biases",
                    w[0], w[1], w[1]
                )));
            }
        }
        Ok(MlpModel { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Parameter `index` of layer `layer`, counting weights (row-major)
    /// before biases.
    pub fn parameter_mut(&mut self, layer: usize, index: usize) -> &mut f64 {
        let l = &mut self.layers[layer];
        let n_w = l.weights.as_slice().len();
        if index < n_w {
            &mut l.weights.as_mut_slice()[index]
        } else {
            &mut l.bias[index - n_w]
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::config(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.config.input_dim
            )));
        }
        let (hidden, last) = self.layers.split_at(self.layers.len() - 1);
        let mut pre_activations = Vec::with_capacity(hidden.len());
        let mut activations: Vec<Matrix> = Vec::with_capacity(hidden.len());
        for layer in hidden {
            let input = activations.last().unwrap_or(batch);
            let mut z = input.matmul(&layer.weights)?;
            z.add_row_vector(&layer.bias)?;
            activations.push(z.map(relu));
            pre_activations.push(z);
        }
        let input = activations.last().unwrap_or(batch);
        let mut logits = input.matmul(&last[0].weights)?;
        logits.add_row_vector(&last[0].bias)?;
        let probs = softmax_rows(&logits);
        Ok(ForwardTrace {
            inputs: batch.clone(),
            pre_activations,
            activations,
            logits,
            probs,
        })
    }

    /// Softmax probabilities only.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.probs)
    }

    /// Backpropagates `grad_logits` (dLoss/dlogits, already including any
    /// batch-mean factor) to every weight and bias.
    pub fn backward(&self, trace: &ForwardTrace, grad_logits: &Matrix) -> Result<Gradients> {
        if grad_logits.shape() != trace.logits.shape() {
            return Err(Error::config(format!(
                "logit gradient {:?} does not match logits {:?}",
                grad_logits.shape(),
                trace.logits.shape()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_logits.clone();
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 {
                &trace.inputs
            } else {
                &trace.activations[i - 1]
            };
            let weights_grad = input.transpose().matmul(&upstream)?;
            let bias_grad = upstream.column_sums();
            if i > 0 {
                let mut down = upstream.matmul(&self.layers[i].weights.transpose())?;
                let pre = &trace.pre_activations[i - 1];
                for (d, &z) in down.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                upstream = down;
            }
            grads.push(Layer {
                weights: weights_grad,
                bias: bias_grad,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    const CHECKPOINT_MAGIC: &'static [u8; 8] = b"IGBMLP01";

    /// Writes a little-endian binary checkpoint:
    ///
    /// ```text
    /// magic       8 bytes  "IGBMLP01"
    /// input_dim   u64
    /// hidden      u64
    /// depth       u64
    /// classes     u64
    /// seed        u64
    /// activation  u8       0 = ReLU
    /// per layer:  rows u64, cols u64, rows*cols f64 weights (row-major), cols f64 biases
    /// ```
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::CHECKPOINT_MAGIC)?;
        let c = &self.config;
        for v in [c.input_dim, c.hidden_width, c.depth, c.num_classes] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&c.seed.to_le_bytes())?;
        w.write_all(&[0u8])?;
        for layer in &self.layers {
            w.write_all(&(layer.weights.rows() as u64).to_le_bytes())?;
            w.write_all(&(layer.weights.cols() as u64).to_le_bytes())?;
            for v in layer.weights.as_slice().iter().chain(&layer.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::CHECKPOINT_MAGIC {
            return Err(Error::format(format!("bad checkpoint magic {magic:?}")));
        }
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let input_dim = read_u64(&mut r)? as usize;
        let hidden_width = read_u64(&mut r)? as usize;
        let depth = read_u64(&mut r)? as usize;
        let num_classes = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        if tag[0] != 0 {
            return Err(Error::format(format!("unknown activation tag {}", tag[0])));
        }
        let config = ModelConfig {
            input_dim,
            hidden_width,
            depth,
            num_classes,
            activation: Activation::Relu,
            seed,
        };
        config.validate()?;
        let mut layers = Vec::with_capacity(depth + 1);
        for w in config.widths().windows(2) {
            let rows = read_u64(&mut r)? as usize;
            let cols = read_u64(&mut r)? as usize;
            if (rows, cols) != (w[0], w[1]) {
                return Err(Error::format(format!(
                    "layer shape {rows}x{cols} does not match config {}x{}",
                    w[0], w[1]
                )));
            }
            let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
                let mut buf = vec![0u8; n * 8];
                r.read_exact(&mut buf)?;
                Ok(buf
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect())
            };
            let weights = Matrix::from_vec(rows, cols, read_f64s(rows * cols)?)?;
            let bias = read_f64s(cols)?;
            layers.push(Layer { weights, bias });
        }
        MlpModel::from_layers(config, layers)
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}
