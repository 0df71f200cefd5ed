//! Gram-matrix style transfer between two spectrograms: a frozen random
//! single-layer CNN extracts features, and the output spectrogram itself is
//! optimized to match content features and style Gram statistics.

use thiserror::Error;

use crate::autograd::{conv2d, AdamState, AutogradError, Tensor};
use crate::config::StyleSection;
use crate::dsp::{DspError, MelSpectrogram};
use crate::mat::Mat;
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum StyleError {
    #[error("mel band mismatch: content has {content} bands, style has {style}")]
    BandMismatch { content: usize, style: usize },
    #[error("empty feature map")]
    EmptyFeatures,
    #[error("spectrogram too narrow: {frames} frames for kernel width {kernel}")]
    TooNarrow { frames: usize, kernel: usize },
    #[error(transparent)]
    Autograd(#[from] AutogradError),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// `G = F F^T / positions` for a `[n_filters x positions]` feature matrix;
/// symmetric positive semidefinite by construction.
pub fn gram_matrix<F: Real>(features: &Tensor<F>) -> Result<Tensor<F>, StyleError> {
    let shape = features.shape();
    if shape.len() != 2 {
        return Err(StyleError::Autograd(AutogradError::ShapeMismatch(format!(
            "gram_matrix needs [filters, positions], got {shape:?}"
        ))));
    }
    if shape[1] == 0 {
        return Err(StyleError::EmptyFeatures);
    }
    let positions = shape[1];
    Ok(features
        .matmul(&features.transpose2d()?)?
        .scale(real::<F>(1.0 / positions as f64)))
}

/// The frozen feature extractor: `n_filters` He-initialized kernels spanning
/// the full mel axis, width `kernel_width` frames, followed by ReLU.
struct StyleLayer<F: Real> {
    kernel: Tensor<F>, // [n_filters, 1, n_mels, kernel_width]
    n_filters: usize,
}

impl<F: Real> StyleLayer<F> {
    fn new(cfg: &StyleSection, n_mels: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derive(seed, 0x57E1);
        let fan_in = n_mels * cfg.kernel_width;
        let bound = (6.0 / fan_in as f64).sqrt();
        let vals: Vec<F> = (0..cfg.n_filters * fan_in)
            .map(|_| rng.uniform(real::<F>(-bound), real::<F>(bound)))
            .collect();
        let kernel = Tensor::constant(vals, &[cfg.n_filters, 1, n_mels, cfg.kernel_width])
            .expect("kernel shape");
        Self {
            kernel,
            n_filters: cfg.n_filters,
        }
    }

    /// `[n_mels x frames]` dB matrix -> `[n_filters x positions]` features.
    fn features(&self, x: &Tensor<F>, n_mels: usize, frames: usize) -> Result<Tensor<F>, StyleError> {
        let kernel_width = self.kernel.shape()[3];
        if frames < kernel_width {
            return Err(StyleError::TooNarrow {
                frames,
                kernel: kernel_width,
            });
        }
        let img = x.reshape(&[1, 1, n_mels, frames])?;
        let fmap = conv2d(&img, &self.kernel, 1, 0)?; // [1, nf, 1, positions]
        let positions = frames - kernel_width + 1;
        Ok(fmap.relu().reshape(&[self.n_filters, positions])?)
    }
}

fn sum_squared_diff<F: Real>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
    let d = a.sub(b)?;
    Ok(d.mul(&d)?.sum())
}

fn spec_tensor<F: Real>(spec: &MelSpectrogram<F>, requires_grad: bool) -> Tensor<F> {
    Tensor::leaf(
        spec.data().data().to_vec(),
        &[spec.n_mels(), spec.n_frames()],
        requires_grad,
    )
    .expect("spectrogram tensor")
}

/// Optimizes a copy of `content` so its features stay close to the content
/// features while its Gram matrix approaches the style Gram matrix. Returns
/// the result (clamped back to the dB range) and the per-step total loss.
pub fn style_transfer<F: Real>(
    content: &MelSpectrogram<F>,
    style: &MelSpectrogram<F>,
    cfg: &StyleSection,
    seed: u64,
) -> Result<(MelSpectrogram<F>, Vec<F>), StyleError> {
    if content.n_mels() != style.n_mels() {
        return Err(StyleError::BandMismatch {
            content: content.n_mels(),
            style: style.n_mels(),
        });
    }
    let n_mels = content.n_mels();
    let layer = StyleLayer::new(cfg, n_mels, seed);

    let content_feat = layer
        .features(&spec_tensor(content, false), n_mels, content.n_frames())?
        .detach();
    let style_gram = gram_matrix(&layer.features(
        &spec_tensor(style, false),
        n_mels,
        style.n_frames(),
    )?)?
    .detach();

    let alpha = real::<F>(cfg.content_weight);
    let beta = real::<F>(cfg.style_weight);
    let x = spec_tensor(content, true);
    let mut adam = AdamState::new(
        real::<F>(cfg.learning_rate),
        real::<F>(0.9),
        real::<F>(0.999),
        std::slice::from_ref(&x),
    );

    let mut history = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        x.zero_grad();
        let feat = layer.features(&x, n_mels, content.n_frames())?;
        let loss_c = sum_squared_diff(&feat, &content_feat)?;
        let loss_s = sum_squared_diff(&gram_matrix(&feat)?, &style_gram)?;
        let total = loss_c.scale(alpha).add(&loss_s.scale(beta))?;
        history.push(total.item());
        total.backward()?;
        adam.step(std::slice::from_ref(&x))?;
    }

    let result = MelSpectrogram::from_parts(
        Mat::from_vec(n_mels, content.n_frames(), x.values()),
        content.params().clone(),
        content.sample_rate(),
        content.floor_db(),
    );
    Ok((result, history))
}

/// Evaluates the two loss terms for a candidate `x` without optimizing.
pub fn style_loss_report<F: Real>(
    x: &MelSpectrogram<F>,
    content: &MelSpectrogram<F>,
    style: &MelSpectrogram<F>,
    cfg: &StyleSection,
    seed: u64,
) -> Result<(F, F), StyleError> {
    if x.n_mels() != content.n_mels() || content.n_mels() != style.n_mels() {
        return Err(StyleError::BandMismatch {
            content: content.n_mels(),
            style: style.n_mels(),
        });
    }
    let n_mels = x.n_mels();
    let layer = StyleLayer::new(cfg, n_mels, seed);
    let fx = layer.features(&spec_tensor(x, false), n_mels, x.n_frames())?;
    let fc = layer.features(&spec_tensor(content, false), n_mels, content.n_frames())?;
    let fs = layer.features(&spec_tensor(style, false), n_mels, style.n_frames())?;
    let content_loss = sum_squared_diff(&fx, &fc)?.item();
    let style_loss = sum_squared_diff(&gram_matrix(&fx)?, &gram_matrix(&fs)?)?.item();
    Ok((content_loss, style_loss))
}
