use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// One fully connected layer: `act(W x + b)` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward network parameters. Also used as the gradient container,
/// since gradients share the parameter layout exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMlp")]
pub struct MlpParams {
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct RawMlp {
    layers: Vec<Layer>,
}

impl TryFrom<RawMlp> for MlpParams {
    type Error = Error;

    fn try_from(raw: RawMlp) -> Result<Self> {
        MlpParams::new(raw.layers)
    }
}

/// Activations recorded during a forward pass, consumed by backpropagation.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
    activations: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::arg("an MLP needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::shape("MLP bias", layer.output_dim(), layer.bias.len()));
            }
            if !layer.bias.iter().all(|b| b.is_finite()) || !layer.weight.is_finite() {
                return Err(Error::data(alloc::format!("non-finite parameter in layer {i}")));
            }
            if i > 0 && layers[i - 1].output_dim() != layer.input_dim() {
                return Err(Error::shape(
                    "MLP layer chaining",
                    layers[i - 1].output_dim(),
                    layer.input_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Zero-valued network with the given layer widths; tanh on hidden
    /// layers and `output_activation` on the last.
    pub fn zeros(dims: &[usize], output_activation: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::arg("an MLP needs at least an input and an output width"));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer {
                weight: DenseMatrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
                activation: if i == last { output_activation } else { Activation::Tanh },
            })
            .collect();
        Self::new(layers)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], output_activation: Activation, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(dims, output_activation)?;
        for layer in &mut params.layers {
            let fan = (layer.input_dim() + layer.output_dim()) as f64;
            let limit = libm::sqrt(6.0 / fan);
            for w in layer.weight.values_mut() {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(params)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.values().len() + l.bias.len()).sum()
    }

    /// Same layout, all zeros. Used to allocate gradient accumulators.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weight: DenseMatrix::zeros(l.output_dim(), l.input_dim()),
                bias: vec![0.0; l.output_dim()],
                activation: l.activation,
            })
            .collect();
        Self { layers }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weight.values_mut().fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// Parameter tensors in a fixed order: per layer, weight then bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.values(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.weight.values_mut());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("MlpParams::set_flat", self.num_params(), flat.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// `self += scale * other` (same layout required).
    pub fn add_scaled(&mut self, scale: f64, other: &MlpParams) -> Result<()> {
        if self.num_params() != other.num_params() {
            return Err(Error::shape(
                "MlpParams::add_scaled",
                self.num_params(),
                other.num_params(),
            ));
        }
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(scale, src, dst);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for layer in &self.layers {
            current = layer_forward(layer, &current);
        }
        Ok(current)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<MlpTrace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let next = layer_forward(layer, activations.last().unwrap());
            activations.push(next);
        }
        Ok(MlpTrace { activations })
    }

    /// Backpropagates `upstream` (gradient w.r.t. the network output) through
    /// a recorded forward pass, adding parameter gradients into `grads`.
    /// Returns the gradient w.r.t. the input when `want_input_grad` is set.
    pub fn backward_into(
        &self,
        trace: &MlpTrace,
        upstream: &[f64],
        grads: &mut MlpParams,
        want_input_grad: bool,
    ) -> Result<Option<Vec<f64>>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::shape("MLP backward upstream", self.output_dim(), upstream.len()));
        }
        if trace.activations.len() != self.layers.len() + 1 || trace.input().len() != self.input_dim() {
            return Err(Error::shape(
                "MLP backward trace",
                self.layers.len() + 1,
                trace.activations.len(),
            ));
        }
        if grads.num_params() != self.num_params() {
            return Err(Error::shape(
                "MLP gradient buffer",
                self.num_params(),
                grads.num_params(),
            ));
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let out = &trace.activations[l + 1];
            let inp = &trace.activations[l];
            for (d, &y) in delta.iter_mut().zip(out) {
                *d *= layer.activation.derivative_from_output(y);
            }
            let g = &mut grads.layers[l];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, inp, g.weight.row_mut(r));
                }
                g.bias[r] += d;
            }
            if l > 0 || want_input_grad {
                let mut next = vec![0.0; layer.input_dim()];
                for (r, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, layer.weight.row(r), &mut next);
                    }
                }
                delta = next;
            }
        }
        Ok(if want_input_grad { Some(delta) } else { None })
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("MLP input", self.input_dim(), input.len()));
        }
        Ok(())
    }
}

#[inline]
fn layer_forward(layer: &Layer, input: &[f64]) -> Vec<f64> {
    layer
        .weight
        .iter_rows()
        .zip(&layer.bias)
        .map(|(row, &b)| layer.activation.apply(dot(row, input) + b))
        .collect()
}

pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    params.forward(input)
}

/// Gradients of `upstream · output` w.r.t. parameters and input.
pub fn mlp_backward(params: &MlpParams, input: &[f64], upstream: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
    let trace = params.forward_trace(input)?;
    let mut grads = params.zeros_like();
    let input_grad = params
        .backward_into(&trace, upstream, &mut grads, true)?
        .expect("input gradient requested");
    Ok((grads, input_grad))
}
