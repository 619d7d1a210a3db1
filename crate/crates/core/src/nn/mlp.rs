//! Dense feedforward networks with hand-written backpropagation.
//!
//! Parameters live in one flat buffer. For each layer the weights come first
//! (row-major, shape `out x in`) followed by the biases. Gradients use the
//! same layout, so optimizers can treat a network as a plain `&mut [f64]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower clamp applied to sigmoid outputs.
pub const SIGMOID_FLOOR: f64 = 1e-6;
/// Upper clamp applied to sigmoid outputs.
pub const SIGMOID_CEIL: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
    Softmax,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Identity => {}
            Activation::Sigmoid => z
                .iter_mut()
                .for_each(|v| *v = sigmoid(*v).clamp(SIGMOID_FLOOR, SIGMOID_CEIL)),
            Activation::Softmax => {
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                z.iter_mut().for_each(|v| *v /= sum);
            }
        }
    }

    /// Turns `grad` (w.r.t. the activation output `y`) into the gradient
    /// w.r.t. the pre-activation, in place.
    fn backprop(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Tanh => grad.iter_mut().zip(y).for_each(|(g, y)| *g *= 1.0 - y * y),
            Activation::Identity => {}
            // Taken at the clamped output, so a saturated unit keeps a small
            // gradient and `d ln y` stays close to `1 - y` instead of
            // vanishing.
            Activation::Sigmoid => grad.iter_mut().zip(y).for_each(|(g, y)| *g *= y * (1.0 - y)),
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(y).map(|(g, y)| g * y).sum();
                grad.iter_mut().zip(y).for_each(|(g, y)| *g = y * (*g - dot));
            }
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A multilayer perceptron: tanh-style hidden layers and a configurable
/// output nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    params: Vec<f64>,
}

/// Activations recorded during a forward pass, consumed by
/// [`Mlp::backward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

fn num_params_for(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Builds a network with all-zero parameters.
    pub fn zeros(layer_dims: &[usize], hidden_activation: Activation, output_activation: Activation) -> Result<Self> {
        let n = Self::validate_dims(layer_dims)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            hidden_activation,
            output_activation,
            params: vec![0.0; n],
        })
    }

    /// Fan-in scaled uniform initialization: weights are drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at zero. The last
    /// layer's weights are additionally multiplied by `output_gain`.
    pub fn new<R: Rng + ?Sized>(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, hidden_activation, output_activation)?;
        let n_layers = mlp.num_layers();
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            for w in &mut mlp.params[offset..offset + fan_in * fan_out] {
                *w = gain * rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(mlp)
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let n = Self::validate_dims(layer_dims)?;
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                context: "mlp parameters",
                expected: n,
                actual: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            hidden_activation,
            output_activation,
            params,
        })
    }

    fn validate_dims(layer_dims: &[usize]) -> Result<usize> {
        if layer_dims.len() < 2 {
            return Err(Error::Config(
                "an mlp needs at least an input and an output layer".into(),
            ));
        }
        if layer_dims.contains(&0) {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        Ok(num_params_for(layer_dims))
    }

    /// Checks the structural invariants; useful after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = Self::validate_dims(&self.layer_dims)?;
        if self.params.len() != n {
            return Err(Error::DimensionMismatch {
                context: "mlp parameters",
                expected: n,
                actual: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of the bias block of the last layer.
    pub fn output_bias_offset(&self) -> usize {
        self.params.len() - self.output_dim()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut offset = 0;
        for l in 0..self.num_layers() {
            x = self.layer_forward(l, &mut offset, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.num_layers() {
            let y = self.layer_forward(l, &mut offset, activations.last().unwrap());
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    fn layer_forward(&self, l: usize, offset: &mut usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
        let w = &self.params[*offset..*offset + n_in * n_out];
        let b = &self.params[*offset + n_in * n_out..*offset + n_in * n_out + n_out];
        *offset += n_in * n_out + n_out;
        let mut z: Vec<f64> = w
            .chunks_exact(n_in)
            .zip(b)
            .map(|(row, bias)| bias + dot(row, x))
            .collect();
        self.activation_of(l).apply(&mut z);
        z
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Accumulates `d(output_grad . y)/d(params)` into `grads`.
    pub fn backward_cached(&self, cache: &ForwardCache, output_grad: &[f64], grads: &mut [f64]) -> Result<()> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp output gradient",
                expected: self.output_dim(),
                actual: output_grad.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "mlp gradient buffer",
                expected: self.params.len(),
                actual: grads.len(),
            });
        }
        if cache.activations.len() != self.layer_dims.len() || cache.input().len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "mlp forward cache",
                expected: self.layer_dims.len(),
                actual: cache.activations.len(),
            });
        }

        let mut delta = output_grad.to_vec();
        let mut end = self.params.len();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let y = &cache.activations[l + 1];
            let x = &cache.activations[l];
            self.activation_of(l).backprop(y, &mut delta);

            let start = end - (n_in * n_out + n_out);
            let (gw, gb) = grads[start..end].split_at_mut(n_in * n_out);
            for ((g_row, gbias), d) in gw.chunks_exact_mut(n_in).zip(gb.iter_mut()).zip(&delta) {
                if *d == 0.0 {
                    continue;
                }
                *gbias += d;
                for (g, xi) in g_row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l > 0 {
                let w = &self.params[start..start + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (row, d) in w.chunks_exact(n_in).zip(&delta) {
                    if *d == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += d * wi;
                    }
                }
                delta = prev;
            }
            end = start;
        }
        Ok(())
    }

    /// Gradient of `output_grad . forward(input)` with respect to every
    /// parameter.
    pub fn backward(&self, input: &[f64], output_grad: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_cached(input)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward_cached(&cache, output_grad, &mut grads)?;
        Ok(grads)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
