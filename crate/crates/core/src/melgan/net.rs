//! The three networks. Stride-2 3x3 convolutions downsample, 4x4 stride-2
//! transposed convolutions upsample (exact doubling with padding 1), skip
//! connections concatenate along channels. Encoder blocks use leaky ReLU,
//! decoder blocks ReLU, per the usual image-translation recipe.

use crate::autograd::{concat, AutogradError, Tensor};
use crate::nn::{Conv2d, ConvTranspose2d, Dense, Init, InstanceNorm2d};
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

const LEAK: f64 = 0.2;

fn ceil_half(v: usize) -> usize {
    v.div_ceil(2)
}

/// U-net generator. `depth` encoder/decoder levels; depth 0 degenerates to a
/// single 1x1 convolution head, which makes an exact-identity configuration
/// expressible for testing.
pub struct Generator<F: Real> {
    depth: usize,
    enc: Vec<(Conv2d<F>, Option<InstanceNorm2d<F>>)>,
    ups: Vec<(ConvTranspose2d<F>, InstanceNorm2d<F>)>,
    head_up: Option<ConvTranspose2d<F>>,
    head0: Option<Conv2d<F>>,
    tanh_head: bool,
}

impl<F: Real> Generator<F> {
    pub fn new(depth: usize, base_channels: usize, tanh_head: bool, seed: u64) -> Self {
        let mut rng = SeededRng::derive(seed, 0x6E01);
        let c = base_channels;

        if depth == 0 {
            let head = Conv2d::new(1, 1, 1, 1, 0, Init::GlorotUniform, &mut rng);
            return Self {
                depth,
                enc: Vec::new(),
                ups: Vec::new(),
                head_up: None,
                head0: Some(head),
                tanh_head,
            };
        }

        let mut enc = Vec::with_capacity(depth);
        for i in 0..depth {
            let (c_in, c_out) = if i == 0 {
                (1, c)
            } else {
                (c << (i - 1), c << i)
            };
            let conv = Conv2d::new(c_in, c_out, 3, 2, 1, Init::HeUniform, &mut rng);
            let norm = (i > 0).then(|| InstanceNorm2d::new(c_out));
            enc.push((conv, norm));
        }

        // Intermediate up blocks target encoder levels depth-2 .. 0; the
        // final up maps the concatenated features back to one channel.
        let mut ups = Vec::new();
        let mut in_ch = c << (depth - 1);
        for i in (0..depth - 1).rev() {
            let out_ch = c << i;
            ups.push((
                ConvTranspose2d::new(in_ch, out_ch, 4, 2, 1, Init::HeUniform, &mut rng),
                InstanceNorm2d::new(out_ch),
            ));
            in_ch = 2 * out_ch; // after skip concat
        }
        let head_up = ConvTranspose2d::new(in_ch, 1, 4, 2, 1, Init::GlorotUniform, &mut rng);

        Self {
            depth,
            enc,
            ups,
            head_up: Some(head_up),
            head0: None,
            tanh_head,
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        let out = if self.depth == 0 {
            self.head0.as_ref().expect("depth-0 head").forward(x)?
        } else {
            let leak = real::<F>(LEAK);
            let mut skips = Vec::with_capacity(self.depth);
            let mut y = x.clone();
            for (conv, norm) in &self.enc {
                y = conv.forward(&y)?;
                if let Some(n) = norm {
                    y = n.forward(&y)?;
                }
                y = y.leaky_relu(leak);
                skips.push(y.clone());
            }
            for (j, (up, norm)) in self.ups.iter().enumerate() {
                y = up.forward(&y)?;
                y = norm.forward(&y)?;
                y = y.relu();
                let level = self.depth - 2 - j;
                y = concat(&[y, skips[level].clone()], 1)?;
            }
            self.head_up.as_ref().expect("final up").forward(&y)?
        };
        Ok(if self.tanh_head { out.tanh() } else { out })
    }

    /// Turns a depth-0 generator into an exact identity: unit 1x1 kernel,
    /// zero bias. Errors on any other depth.
    pub fn set_identity_head(&mut self) -> Result<(), AutogradError> {
        match &self.head0 {
            Some(head) => {
                head.weight.set_values(vec![F::one()])?;
                head.bias.set_values(vec![F::zero()])?;
                Ok(())
            }
            None => Err(AutogradError::ShapeMismatch(
                "identity head requires depth 0".into(),
            )),
        }
    }

    /// Overwrites the output head's bias (single output channel).
    pub fn set_head_bias(&self, v: F) -> Result<(), AutogradError> {
        match (&self.head0, &self.head_up) {
            (Some(head), _) => head.bias.set_values(vec![v]),
            (_, Some(head)) => head.bias.set_values(vec![v]),
            _ => unreachable!("generator always has a head"),
        }
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        self.named_params("gen").into_iter().map(|(_, t)| t).collect()
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, Tensor<F>)> {
        let mut out = Vec::new();
        for (i, (conv, norm)) in self.enc.iter().enumerate() {
            out.push((format!("{prefix}.enc{i}.weight"), conv.weight.clone()));
            out.push((format!("{prefix}.enc{i}.bias"), conv.bias.clone()));
            if let Some(n) = norm {
                out.push((format!("{prefix}.enc{i}.gamma"), n.gamma.clone()));
                out.push((format!("{prefix}.enc{i}.beta"), n.beta.clone()));
            }
        }
        for (j, (up, norm)) in self.ups.iter().enumerate() {
            out.push((format!("{prefix}.up{j}.weight"), up.weight.clone()));
            out.push((format!("{prefix}.up{j}.bias"), up.bias.clone()));
            out.push((format!("{prefix}.up{j}.gamma"), norm.gamma.clone()));
            out.push((format!("{prefix}.up{j}.beta"), norm.beta.clone()));
        }
        if let Some(h) = &self.head_up {
            out.push((format!("{prefix}.head.weight"), h.weight.clone()));
            out.push((format!("{prefix}.head.bias"), h.bias.clone()));
        }
        if let Some(h) = &self.head0 {
            out.push((format!("{prefix}.head.weight"), h.weight.clone()));
            out.push((format!("{prefix}.head.bias"), h.bias.clone()));
        }
        out
    }
}

/// Three stride-2 leaky-ReLU conv blocks, a 1x1 projection to one channel,
/// then a global spatial mean: one unbounded realness score per sample.
pub struct Discriminator<F: Real> {
    blocks: Vec<Conv2d<F>>,
    head: Conv2d<F>,
}

impl<F: Real> Discriminator<F> {
    pub fn new(base_channels: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derive(seed, 0xD15C);
        let c = base_channels;
        let blocks = vec![
            Conv2d::new(1, c, 3, 2, 1, Init::HeUniform, &mut rng),
            Conv2d::new(c, 2 * c, 3, 2, 1, Init::HeUniform, &mut rng),
            Conv2d::new(2 * c, 4 * c, 3, 2, 1, Init::HeUniform, &mut rng),
        ];
        let head = Conv2d::new(4 * c, 1, 1, 1, 0, Init::GlorotUniform, &mut rng);
        Self { blocks, head }
    }

    /// `x: [n, 1, h, w] -> scores [n, 1]`.
    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        let leak = real::<F>(LEAK);
        let mut y = x.clone();
        for block in &self.blocks {
            y = block.forward(&y)?.leaky_relu(leak);
        }
        y = self.head.forward(&y)?;
        let shape = y.shape();
        let (n, hw) = (shape[0], shape[2] * shape[3]);
        let flat = y.reshape(&[n, hw])?;
        Ok(flat.row_sum()?.scale(real::<F>(1.0 / hw as f64)))
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        self.named_params("disc").into_iter().map(|(_, t)| t).collect()
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, Tensor<F>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            out.push((format!("{prefix}.block{i}.weight"), block.weight.clone()));
            out.push((format!("{prefix}.block{i}.bias"), block.bias.clone()));
        }
        out.push((format!("{prefix}.head.weight"), self.head.weight.clone()));
        out.push((format!("{prefix}.head.bias"), self.head.bias.clone()));
        out
    }
}

/// Weight-shared content encoder: three conv blocks and a dense projection
/// to a fixed-size embedding.
pub struct Siamese<F: Real> {
    blocks: Vec<Conv2d<F>>,
    fc: Dense<F>,
    flat_dim: usize,
}

impl<F: Real> Siamese<F> {
    pub fn new(
        base_channels: usize,
        embedding_dim: usize,
        n_mels: usize,
        seg_frames: usize,
        seed: u64,
    ) -> Self {
        let mut rng = SeededRng::derive(seed, 0x51A3);
        let c = base_channels;
        let blocks = vec![
            Conv2d::new(1, c, 3, 2, 1, Init::HeUniform, &mut rng),
            Conv2d::new(c, 2 * c, 3, 2, 1, Init::HeUniform, &mut rng),
            Conv2d::new(2 * c, 4 * c, 3, 2, 1, Init::HeUniform, &mut rng),
        ];
        let h = ceil_half(ceil_half(ceil_half(n_mels)));
        let w = ceil_half(ceil_half(ceil_half(seg_frames)));
        let flat_dim = 4 * c * h * w;
        let fc = Dense::new(flat_dim, embedding_dim, Init::GlorotUniform, &mut rng);
        Self { blocks, fc, flat_dim }
    }

    /// `x: [n, 1, h, w] -> embeddings [n, embedding_dim]`.
    pub fn forward(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        let leak = real::<F>(LEAK);
        let mut y = x.clone();
        for block in &self.blocks {
            y = block.forward(&y)?.leaky_relu(leak);
        }
        let n = y.shape()[0];
        let flat = y.reshape(&[n, self.flat_dim])?;
        self.fc.forward(&flat)
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        self.named_params("siam").into_iter().map(|(_, t)| t).collect()
    }

    pub fn named_params(&self, prefix: &str) -> Vec<(String, Tensor<F>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            out.push((format!("{prefix}.block{i}.weight"), block.weight.clone()));
            out.push((format!("{prefix}.block{i}.bias"), block.bias.clone()));
        }
        out.push((format!("{prefix}.fc.weight"), self.fc.weight.clone()));
        out.push((format!("{prefix}.fc.bias"), self.fc.bias.clone()));
        out
    }
}
