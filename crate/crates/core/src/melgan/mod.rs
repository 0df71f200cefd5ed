//! Spectrogram-to-spectrogram emotional style transfer: a U-net generator,
//! a convolutional discriminator, and a siamese content encoder, trained
//! adversarially per ordered emotion pair.

mod loss;
mod net;
mod train;

pub use loss::{
    adversarial_losses, hinge_values, siamese_margin_loss, siamese_margin_loss_embeddings,
    travel_loss, travel_loss_embeddings,
};
pub use net::{Discriminator, Generator, Siamese};
pub use train::{train_pair, GanLosses, TrainReport};

use thiserror::Error;

use crate::autograd::{AutogradError, Tensor};
use crate::classifier::EmotionLabel;
use crate::config::{DspSection, MelganSection};
use crate::dsp::{griffin_lim_mel, mel_spectrogram, AudioClip, DspError, MelSpectrogram, PhaseInit, StftParams};
use crate::mat::Mat;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum MelganError {
    #[error("empty spectrogram")]
    EmptySpectrogram,
    #[error("segment batch too small: {0} (need at least 2)")]
    BatchTooSmall(usize),
    #[error("empty {0} pool")]
    EmptyPool(&'static str),
    #[error("segment shape {got:?} does not match model ({expected:?})")]
    SegmentShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("non-finite loss at step {step}")]
    NanLoss { step: usize },
    #[error("invalid melgan config: {0}")]
    Config(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
}

/// One fixed-width spectrogram window, values scaled to `[-1, 1]` from the
/// dB range `[floor_db, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramSegment<F> {
    data: Mat<F>,
}

impl<F: Real> SpectrogramSegment<F> {
    pub fn from_mat(data: Mat<F>) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &Mat<F> {
        &self.data
    }

    pub fn n_mels(&self) -> usize {
        self.data.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.cols()
    }
}

/// Splits a mel spectrogram into non-overlapping `seg_frames`-wide segments,
/// right-padding the final remainder with the floor value, and rescales
/// `[floor_db, 0]` to `[-1, 1]`.
pub fn segment<F: Real>(
    spec: &MelSpectrogram<F>,
    seg_frames: usize,
) -> Result<Vec<SpectrogramSegment<F>>, MelganError> {
    assert!(seg_frames > 0, "seg_frames must be positive");
    let n_frames = spec.n_frames();
    if n_frames == 0 {
        return Err(MelganError::EmptySpectrogram);
    }
    let n_mels = spec.n_mels();
    let floor = spec.floor_db();
    let scale = real::<F>(2.0) / -floor; // dB span is [floor, 0]
    let to_unit = |db: F| (db - floor) * scale - F::one();

    let n_segments = n_frames.div_ceil(seg_frames);
    let mut out = Vec::with_capacity(n_segments);
    for s in 0..n_segments {
        let mut seg = Mat::filled(n_mels, seg_frames, -F::one());
        for local in 0..seg_frames {
            let t = s * seg_frames + local;
            if t >= n_frames {
                break;
            }
            for m in 0..n_mels {
                seg.set(m, local, to_unit(spec.data().get(m, t)));
            }
        }
        out.push(SpectrogramSegment::from_mat(seg));
    }
    Ok(out)
}

/// Inverse of [`segment`]: concatenates segments, trims to `n_frames`
/// columns, and maps `[-1, 1]` back to dB.
pub fn unsegment<F: Real>(
    segments: &[SpectrogramSegment<F>],
    n_frames: usize,
    params: &StftParams<F>,
    sample_rate: u32,
    floor_db: F,
) -> Result<MelSpectrogram<F>, MelganError> {
    if segments.is_empty() {
        return Err(MelganError::EmptySpectrogram);
    }
    let n_mels = segments[0].n_mels();
    let seg_frames = segments[0].n_frames();
    if segments.len() * seg_frames < n_frames {
        return Err(MelganError::Config(format!(
            "{} segments of {} frames cannot cover {} frames",
            segments.len(),
            seg_frames,
            n_frames
        )));
    }
    let half_span = -floor_db / real::<F>(2.0);
    let to_db = |v: F| (v + F::one()) * half_span + floor_db;

    let mut data = Mat::zeros(n_mels, n_frames);
    for t in 0..n_frames {
        let seg = &segments[t / seg_frames];
        let local = t % seg_frames;
        for m in 0..n_mels {
            data.set(m, t, to_db(seg.data().get(m, local)));
        }
    }
    Ok(MelSpectrogram::from_parts(
        data,
        params.clone(),
        sample_rate,
        floor_db,
    ))
}

/// Stacks segments into a `[n, 1, n_mels, seg_frames]` input tensor.
pub fn batch_tensor<F: Real>(segments: &[&SpectrogramSegment<F>]) -> Tensor<F> {
    assert!(!segments.is_empty());
    let (m, t) = (segments[0].n_mels(), segments[0].n_frames());
    let mut values = Vec::with_capacity(segments.len() * m * t);
    for seg in segments {
        values.extend_from_slice(seg.data().data());
    }
    Tensor::constant(values, &[segments.len(), 1, m, t]).expect("segment batch shape")
}

/// Generator / discriminator / siamese trio for one ordered emotion pair.
pub struct MelganModel<F: Real> {
    pub pair: (EmotionLabel, EmotionLabel),
    pub melgan: MelganSection,
    pub dsp: DspSection,
    pub seed: u64,
    pub generator: Generator<F>,
    pub discriminator: Discriminator<F>,
    pub siamese: Siamese<F>,
}

impl<F: Real> MelganModel<F> {
    pub fn new(
        melgan: &MelganSection,
        dsp: &DspSection,
        pair: (EmotionLabel, EmotionLabel),
        seed: u64,
    ) -> Result<Self, MelganError> {
        let div = 1usize << melgan.depth;
        if !dsp.n_mels.is_multiple_of(div) || !melgan.seg_frames.is_multiple_of(div) {
            return Err(MelganError::Config(format!(
                "n_mels {} and seg_frames {} must be divisible by 2^depth ({div})",
                dsp.n_mels, melgan.seg_frames
            )));
        }
        let tanh_head = match melgan.output_activation.as_str() {
            "tanh" => true,
            "linear" => false,
            other => {
                return Err(MelganError::Config(format!(
                    "unknown output_activation '{other}'"
                )))
            }
        };
        Ok(Self {
            pair,
            melgan: melgan.clone(),
            dsp: dsp.clone(),
            seed,
            generator: Generator::new(melgan.depth, melgan.base_channels, tanh_head, seed),
            discriminator: Discriminator::new(melgan.base_channels, seed),
            siamese: Siamese::new(
                melgan.base_channels,
                melgan.embedding_dim,
                dsp.n_mels,
                melgan.seg_frames,
                seed,
            ),
        })
    }

    /// Styles one segment; output shape equals input shape and values stay
    /// in `[-1, 1]` under the tanh head. Deterministic given the parameters.
    pub fn generate(
        &self,
        seg: &SpectrogramSegment<F>,
    ) -> Result<SpectrogramSegment<F>, MelganError> {
        let expected = (self.dsp.n_mels, self.melgan.seg_frames);
        let got = (seg.n_mels(), seg.n_frames());
        if got != expected {
            return Err(MelganError::SegmentShape { expected, got });
        }
        let x = batch_tensor(&[seg]);
        let y = self.generator.forward(&x)?;
        let values = y.values();
        Ok(SpectrogramSegment::from_mat(Mat::from_vec(
            expected.0, expected.1, values,
        )))
    }

    pub fn generator_params(&self) -> Vec<Tensor<F>> {
        self.generator.params()
    }

    pub fn named_params(&self) -> Vec<(String, Tensor<F>)> {
        let mut out = self.generator.named_params("gen");
        out.extend(self.discriminator.named_params("disc"));
        out.extend(self.siamese.named_params("siam"));
        out
    }

    pub fn state_dict(&self) -> Vec<(String, Vec<usize>, Vec<F>)> {
        self.named_params()
            .into_iter()
            .map(|(name, t)| (name, t.shape(), t.values()))
            .collect()
    }

    pub fn load_state_dict(
        &mut self,
        tensors: &[(String, Vec<usize>, Vec<F>)],
    ) -> Result<(), MelganError> {
        let named = self.named_params();
        let mut by_name: std::collections::HashMap<String, Tensor<F>> =
            named.into_iter().collect();
        if tensors.len() != by_name.len() {
            return Err(MelganError::Config(format!(
                "checkpoint has {} tensors, model expects {}",
                tensors.len(),
                by_name.len()
            )));
        }
        for (name, shape, values) in tensors {
            let target = by_name.remove(name).ok_or_else(|| {
                MelganError::Config(format!("unknown or duplicate tensor '{name}'"))
            })?;
            if *shape != target.shape() {
                return Err(MelganError::Config(format!(
                    "{name}: checkpoint shape {shape:?} vs model {:?}",
                    target.shape()
                )));
            }
            target.set_values(values.clone())?;
        }
        Ok(())
    }
}

/// Full clip-to-clip transfer: mel analysis, per-segment generation,
/// reassembly, Griffin-Lim reconstruction. Also returns the input and
/// generated spectrograms for plotting.
pub fn transfer_with_spectrograms<F: Real>(
    model: &MelganModel<F>,
    clip: &AudioClip<F>,
) -> Result<(AudioClip<F>, MelSpectrogram<F>, MelSpectrogram<F>), MelganError> {
    let params = model.dsp.stft_params::<F>()?;
    let floor = model.dsp.floor::<F>();
    let mel_in = mel_spectrogram(clip, model.dsp.n_mels, &params, floor)?;
    let segs = segment(&mel_in, model.melgan.seg_frames)?;
    let generated: Vec<SpectrogramSegment<F>> = segs
        .iter()
        .map(|s| model.generate(s))
        .collect::<Result<_, _>>()?;
    let mel_out = unsegment(
        &generated,
        mel_in.n_frames(),
        &params,
        clip.sample_rate(),
        floor,
    )?;
    let (audio, _errors) = griffin_lim_mel(
        &mel_out,
        model.dsp.griffin_lim_iterations,
        PhaseInit::Zero,
    )?;
    Ok((audio, mel_in, mel_out))
}

pub fn transfer<F: Real>(
    model: &MelganModel<F>,
    clip: &AudioClip<F>,
) -> Result<AudioClip<F>, MelganError> {
    transfer_with_spectrograms(model, clip).map(|(audio, _, _)| audio)
}
