use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::loss::softmax_in_place;
use super::matrix::{dot, Matrix};
use super::tape::{ParamId, Tape, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn apply(self, v: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Tanh => v.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Softmax => softmax_in_place(v),
        }
    }
}

/// `activation(W·x + b)` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
        let data = (0..input * output).map(|_| dist.sample(rng)).collect();
        Self {
            weights: Matrix::from_vec(output, input, data).expect("sized above"),
            bias: vec![0.0; output],
            activation,
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "layer expects input of length {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut out: Vec<f64> = (0..self.output_dim())
            .map(|r| dot(self.weights.row(r), x) + self.bias[r])
            .collect();
        self.activation.apply(&mut out);
        Ok(out)
    }

    /// Records `activation(X·Wᵀ + b)` on the tape for a batch `X`.
    ///
    /// `ids` supplies parameter ids for the weights and, when present, the
    /// bias. A layer recorded without a bias id keeps its bias fixed.
    pub fn record(&self, tape: &mut Tape, x: Var, weight_id: ParamId, bias_id: Option<ParamId>) -> Result<Var> {
        let w = tape.param(weight_id, self.weights.clone());
        let mut h = tape.matmul_t(x, w)?;
        match bias_id {
            Some(id) => {
                let b = tape.param(id, Matrix::row_vector(self.bias.clone()));
                h = tape.add_row(h, b)?;
            }
            None if self.bias.iter().any(|&b| b != 0.0) => {
                let b = tape.constant(Matrix::row_vector(self.bias.clone()));
                h = tape.add_row(h, b)?;
            }
            None => {}
        }
        Ok(match self.activation {
            Activation::Identity => h,
            Activation::Relu => tape.relu(h),
            Activation::Tanh => tape.tanh(h),
            Activation::Softmax => tape.softmax(h),
        })
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer outputs {} feed a layer expecting {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Builds `sizes[0] → sizes[1] → … → sizes[n]` with `hidden` activations
    /// between layers and `last` on the final one.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, last: Activation, rng: &mut R) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n { last } else { hidden };
                DenseLayer::glorot(sizes[k], sizes[k + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Records the stack on the tape; parameter ids start at `first_id` and
    /// run weights, bias, weights, bias, ….
    pub fn record(&self, tape: &mut Tape, x: Var, first_id: usize) -> Result<Var> {
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            let base = first_id + 2 * k;
            h = layer.record(tape, h, ParamId(base), Some(ParamId(base + 1)))?;
        }
        Ok(h)
    }

    pub fn param_count(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.data(), l.bias.as_slice()])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.data_mut(), l.bias.as_mut_slice()])
    }
}

/// Shorthand for `layer.forward(x)`.
pub fn dense_forward(x: &[f64], layer: &DenseLayer) -> Result<Vec<f64>> {
    layer.forward(x)
}
