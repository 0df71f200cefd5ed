//! Emotional style transfer for speech, operating on mel spectrograms.
//!
//! The crate is organized around the pipeline: `corpus` ingests labeled WAV
//! files, `dsp` turns audio into mel spectrograms and back, `autograd` is a
//! small reverse-mode engine powering three models — the `melgan` style
//! transfer trio (generator / discriminator / siamese), the `neural_style`
//! Gram-matrix baseline, and the MFCC emotion `classifier` that judges
//! generated audio. `checkpoint` and `config` handle persistence.
//!
//! All numeric code is generic over the scalar type ([`scalar::Real`]):
//! training runs at `f32`, gradient checks and DSP oracles at `f64`. The
//! commonly used `f32` instantiations have aliases at the crate root.

pub mod autograd;
pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod mat;
pub mod melgan;
pub mod neural_style;
pub mod nn;
pub mod reference;
pub mod rng;
pub mod scalar;

pub use classifier::EmotionLabel;
pub use scalar::Real;

/// `f32` instantiations used by the training pipeline.
pub type AudioClip32 = dsp::AudioClip<f32>;
pub type MelSpectrogram32 = dsp::MelSpectrogram<f32>;
pub type StftParams32 = dsp::StftParams<f32>;
pub type Tensor32 = autograd::Tensor<f32>;
pub type MelganModel32 = melgan::MelganModel<f32>;
pub type ClassifierModel32 = classifier::ClassifierModel<f32>;

/// `f64` twins for oracle tests and gradient checks.
pub type AudioClip64 = dsp::AudioClip<f64>;
pub type MelSpectrogram64 = dsp::MelSpectrogram<f64>;
pub type Tensor64 = autograd::Tensor<f64>;
