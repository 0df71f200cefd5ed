//! Parameterized layers built on the autograd ops, plus weight
//! initialization. He-uniform feeds ReLU-family activations, Glorot-uniform
//! everything else; biases start at zero.

use crate::autograd::{self as ops, AutogradError, Tensor};
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    HeUniform,
    GlorotUniform,
}

fn init_values<F: Real>(
    rng: &mut SeededRng,
    n: usize,
    init: Init,
    fan_in: usize,
    fan_out: usize,
) -> Vec<F> {
    let bound = match init {
        Init::HeUniform => (6.0 / fan_in as f64).sqrt(),
        Init::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    (0..n)
        .map(|_| rng.uniform(real::<F>(-bound), real::<F>(bound)))
        .collect()
}

/// Fully connected layer: `x [b, in] -> x W + bias [b, out]`.
pub struct Dense<F: Real> {
    pub weight: Tensor<F>, // [in, out]
    pub bias: Tensor<F>,   // [out]
    pub in_features: usize,
    pub out_features: usize,
}

impl<F: Real> Dense<F> {
    pub fn new(in_features: usize, out_features: usize, init: Init, rng: &mut SeededRng) -> Self {
        let w = init_values::<F>(rng, in_features * out_features, init, in_features, out_features);
        Self {
            weight: Tensor::leaf(w, &[in_features, out_features], true).expect("shape"),
            bias: Tensor::zeros(&[out_features], true),
            in_features,
            out_features,
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        x.matmul(&self.weight)?.add(&self.bias)
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

/// 2-D convolution layer with per-channel bias.
pub struct Conv2d<F: Real> {
    pub weight: Tensor<F>, // [c_out, c_in, kh, kw]
    pub bias: Tensor<F>,   // [c_out]
    pub stride: usize,
    pub padding: usize,
}

impl<F: Real> Conv2d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        init: Init,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = c_in * kernel * kernel;
        let fan_out = c_out * kernel * kernel;
        let w = init_values::<F>(rng, c_out * fan_in, init, fan_in, fan_out);
        Self {
            weight: Tensor::leaf(w, &[c_out, c_in, kernel, kernel], true).expect("shape"),
            bias: Tensor::zeros(&[c_out], true),
            stride,
            padding,
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        ops::add_channel_bias(
            &ops::conv2d(x, &self.weight, self.stride, self.padding)?,
            &self.bias,
        )
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

/// 2-D transposed convolution layer with per-channel bias.
pub struct ConvTranspose2d<F: Real> {
    pub weight: Tensor<F>, // [c_in, c_out, kh, kw]
    pub bias: Tensor<F>,   // [c_out]
    pub stride: usize,
    pub padding: usize,
}

impl<F: Real> ConvTranspose2d<F> {
    pub fn new(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        init: Init,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = c_out * kernel * kernel;
        let fan_out = c_in * kernel * kernel;
        let w = init_values::<F>(rng, c_in * fan_in, init, fan_in, fan_out);
        Self {
            weight: Tensor::leaf(w, &[c_in, c_out, kernel, kernel], true).expect("shape"),
            bias: Tensor::zeros(&[c_out], true),
            stride,
            padding,
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        ops::add_channel_bias(
            &ops::conv2d_transpose(x, &self.weight, self.stride, self.padding)?,
            &self.bias,
        )
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        vec![self.weight.clone(), self.bias.clone()]
    }
}

/// Instance normalization with learned per-channel scale and shift.
pub struct InstanceNorm2d<F: Real> {
    pub gamma: Tensor<F>,
    pub beta: Tensor<F>,
    pub eps: F,
}

impl<F: Real> InstanceNorm2d<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::leaf(vec![F::one(); channels], &[channels], true).expect("shape"),
            beta: Tensor::zeros(&[channels], true),
            eps: real::<F>(1e-5),
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        ops::instance_norm(x, &self.gamma, &self.beta, self.eps)
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        vec![self.gamma.clone(), self.beta.clone()]
    }
}
