//! Deterministic signal processing: windowed STFT and its inverse, mel
//! filterbank, MFCC, Griffin-Lim reconstruction, and the frame-level
//! features used by the emotion classifier.
//!
//! Every function here is a pure function of its inputs; concurrent callers
//! need no coordination.

pub mod fft;
mod features;
mod griffin_lim;
mod mel;

pub use features::{amplitude_envelope, zero_crossing_rate};
pub use griffin_lim::{griffin_lim_linear, griffin_lim_mel, PhaseInit};
pub use mel::{
    hz_to_mel, mel_filter_centers, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc, MfccMatrix,
};

use num_complex::Complex;
use thiserror::Error;

use crate::mat::Mat;
use crate::scalar::{real, Real};

/// dB floor applied to log-magnitude spectrograms, relative to each clip's
/// maximum: cells live in `[floor_db, 0]`.
pub const DEFAULT_FLOOR_DB: f64 = -80.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("clip too short: {len} samples, need at least {needed}")]
    ClipTooShort { len: usize, needed: usize },
    #[error("empty clip")]
    EmptyClip,
    #[error("spectrogram shape incompatible with params: expected {expected} bins, got {got}")]
    ParamMismatch { expected: usize, got: usize },
    #[error("negative frequency {0} Hz")]
    NegativeFrequency(f64),
    #[error("bad mel band: f_max {f_max} Hz exceeds Nyquist {nyquist} Hz (or f_min >= f_max)")]
    BadBand { f_max: f64, nyquist: f64 },
    #[error("requested {n_coeffs} MFCC coefficients from {n_mels} mel bands")]
    TooManyCoeffs { n_coeffs: usize, n_mels: usize },
    #[error("invalid stft params: {0}")]
    InvalidStftParams(String),
}

/// Mono audio: samples in `[-1, 1]` at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<F> {
    samples: Vec<F>,
    sample_rate: u32,
}

impl<F: Real> AudioClip<F> {
    pub fn new(samples: Vec<F>, sample_rate: u32) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::EmptyClip);
        }
        assert!(sample_rate > 0, "sample rate must be positive");
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Scales so the peak magnitude equals `target`. A silent clip is left
    /// untouched. After this, all magnitudes are within `target + 1e-6`.
    pub fn peak_normalize(&mut self, target: F) {
        let peak = self
            .samples
            .iter()
            .fold(F::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
        if peak > F::zero() {
            let scale = target / peak;
            for s in &mut self.samples {
                *s *= scale;
            }
        }
    }
}

/// STFT analysis parameters with the precomputed periodic Hann window.
#[derive(Debug, Clone, PartialEq)]
pub struct StftParams<F> {
    window_len: usize,
    hop_len: usize,
    fft_len: usize,
    window: Vec<F>,
}

impl<F: Real> StftParams<F> {
    pub fn new(window_len: usize, hop_len: usize, fft_len: usize) -> Result<Self, DspError> {
        if hop_len == 0 || hop_len > window_len || window_len > fft_len {
            return Err(DspError::InvalidStftParams(format!(
                "need 0 < hop ({hop_len}) <= window ({window_len}) <= fft ({fft_len})"
            )));
        }
        if !fft_len.is_power_of_two() {
            return Err(DspError::InvalidStftParams(format!(
                "fft_len {fft_len} is not a power of two"
            )));
        }
        Ok(Self {
            window_len,
            hop_len,
            fft_len,
            window: hann(window_len),
        })
    }

    /// 25 ms window / 10 ms hop at 16 kHz, zero-padded to 512.
    pub fn default_16k() -> Self {
        Self::new(400, 160, 512).expect("default params are valid")
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn window(&self) -> &[F] {
        &self.window
    }

    /// Frame count for a clip of `len` samples: `1 + (len - window) / hop`.
    pub fn n_frames(&self, len: usize) -> Result<usize, DspError> {
        if len < self.window_len {
            return Err(DspError::ClipTooShort {
                len,
                needed: self.window_len,
            });
        }
        Ok(1 + (len - self.window_len) / self.hop_len)
    }
}

/// Periodic Hann window: `0.5 * (1 - cos(2 pi n / N))`.
fn hann<F: Real>(len: usize) -> Vec<F> {
    (0..len)
        .map(|n| {
            let v = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos());
            real::<F>(v)
        })
        .collect()
}

/// Short-time Fourier transform. Column `t` is the DFT of the Hann-windowed
/// frame starting at `t * hop`, zero-padded to `fft_len`; rows are the
/// `fft_len/2 + 1` non-negative frequency bins.
pub fn stft<F: Real>(
    clip: &AudioClip<F>,
    params: &StftParams<F>,
) -> Result<Mat<Complex<F>>, DspError> {
    let n_frames = params.n_frames(clip.len())?;
    let n_bins = params.n_bins();
    let mut out = Mat::filled(n_bins, n_frames, Complex::new(F::zero(), F::zero()));
    let mut frame = vec![Complex::new(F::zero(), F::zero()); params.fft_len];

    for t in 0..n_frames {
        let start = t * params.hop_len;
        for (i, slot) in frame.iter_mut().enumerate() {
            let v = if i < params.window_len {
                clip.samples[start + i] * params.window[i]
            } else {
                F::zero()
            };
            *slot = Complex::new(v, F::zero());
        }
        fft::fft(&mut frame);
        for (bin, &v) in frame.iter().take(n_bins).enumerate() {
            out.set(bin, t, v);
        }
    }
    Ok(out)
}

/// Inverse STFT by windowed overlap-add with per-sample squared-window
/// normalization; reconstructs interior samples of a valid STFT exactly (up
/// to floating point).
pub fn istft<F: Real>(
    spec: &Mat<Complex<F>>,
    params: &StftParams<F>,
    sample_rate: u32,
) -> Result<AudioClip<F>, DspError> {
    let n_bins = params.n_bins();
    if spec.rows() != n_bins {
        return Err(DspError::ParamMismatch {
            expected: n_bins,
            got: spec.rows(),
        });
    }
    let n_frames = spec.cols();
    if n_frames == 0 {
        return Err(DspError::ParamMismatch {
            expected: 1,
            got: 0,
        });
    }

    let out_len = params.window_len + (n_frames - 1) * params.hop_len;
    let mut acc = vec![F::zero(); out_len];
    let mut norm = vec![F::zero(); out_len];
    let mut frame = vec![Complex::new(F::zero(), F::zero()); params.fft_len];

    for t in 0..n_frames {
        // Rebuild the full Hermitian spectrum from the half kept by stft.
        for bin in 0..n_bins {
            frame[bin] = spec.get(bin, t);
        }
        for bin in n_bins..params.fft_len {
            frame[bin] = spec.get(params.fft_len - bin, t).conj();
        }
        fft::ifft(&mut frame);
        let start = t * params.hop_len;
        for i in 0..params.window_len {
            let w = params.window[i];
            acc[start + i] += w * frame[i].re;
            norm[start + i] += w * w;
        }
    }

    let tiny = real::<F>(1e-10);
    let samples = acc
        .iter()
        .zip(norm.iter())
        .map(|(&a, &n)| if n > tiny { a / n } else { F::zero() })
        .collect();
    AudioClip::new(samples, sample_rate)
}

/// Log-magnitude mel spectrogram: `[n_mels x n_frames]`, dB relative to the
/// clip maximum, clamped to `[floor_db, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram<F> {
    data: Mat<F>,
    n_mels: usize,
    params: StftParams<F>,
    sample_rate: u32,
    floor_db: F,
}

impl<F: Real> MelSpectrogram<F> {
    /// Wraps precomputed dB data; cells are clamped to `[floor_db, 0]`.
    pub fn from_parts(
        data: Mat<F>,
        params: StftParams<F>,
        sample_rate: u32,
        floor_db: F,
    ) -> Self {
        let n_mels = data.rows();
        let clamped = data.map(|v| {
            debug_assert!(v.is_finite());
            v.max(floor_db).min(F::zero())
        });
        Self {
            data: clamped,
            n_mels,
            params,
            sample_rate,
            floor_db,
        }
    }

    pub fn data(&self) -> &Mat<F> {
        &self.data
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.data.cols()
    }

    pub fn params(&self) -> &StftParams<F> {
        &self.params
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn floor_db(&self) -> F {
        self.floor_db
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_clip(freq: f64, secs: f64, sr: u32) -> AudioClip<f64> {
        let n = (secs * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    fn noise_clip(n: usize, sr: u32, seed: u64) -> AudioClip<f64> {
        let mut rng = crate::rng::SeededRng::new(seed);
        let samples = (0..n).map(|_| rng.uniform(-0.9, 0.9)).collect();
        AudioClip::new(samples, sr).unwrap()
    }

    use crate::reference::naive_stft_magnitudes;

    #[test]
    fn params_reject_bad_shapes() {
        assert!(StftParams::<f64>::new(400, 0, 512).is_err());
        assert!(StftParams::<f64>::new(400, 500, 512).is_err());
        assert!(StftParams::<f64>::new(600, 160, 512).is_err());
        assert!(StftParams::<f64>::new(400, 160, 500).is_err());
    }

    #[test]
    fn frame_count_formula() {
        let params = StftParams::<f64>::default_16k();
        // 3 s at 16 kHz: 1 + (48000 - 400) / 160 = 298.
        assert_eq!(params.n_frames(48_000).unwrap(), 298);
        assert_eq!(params.n_frames(400).unwrap(), 1);
        assert!(matches!(
            params.n_frames(399),
            Err(DspError::ClipTooShort { .. })
        ));
    }

    #[test]
    fn stft_of_silence_is_zero() {
        let clip = AudioClip::new(vec![0.0f64; 16_000], 16_000).unwrap();
        let params = StftParams::default_16k();
        let spec = stft(&clip, &params).unwrap();
        for v in spec.data() {
            assert_eq!(v.norm(), 0.0);
        }
    }

    #[test]
    fn stft_of_impulse_is_flat_at_window_value() {
        let params = StftParams::<f64>::default_16k();
        let pos = 137;
        let mut samples = vec![0.0f64; 800];
        samples[pos] = 1.0;
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let spec = stft(&clip, &params).unwrap();
        let expected = params.window()[pos];
        for bin in 0..params.n_bins() {
            assert!((spec.get(bin, 0).norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_peaks_at_expected_bin_and_matches_naive_dft() {
        let clip = sine_clip(1000.0, 0.2, 16_000);
        let params = StftParams::default_16k();
        let spec = stft(&clip, &params).unwrap();
        let oracle = naive_stft_magnitudes(&clip, &params);

        // 1 kHz at fft 512 / sr 16 kHz falls on bin 1000 * 512 / 16000 = 32.
        for t in 0..spec.cols() {
            let peak = (0..spec.rows())
                .max_by(|&a, &b| {
                    spec.get(a, t)
                        .norm()
                        .partial_cmp(&spec.get(b, t).norm())
                        .unwrap()
                })
                .unwrap();
            assert_eq!(peak, 32);
        }
        for bin in 0..spec.rows() {
            for t in 0..spec.cols() {
                assert!((spec.get(bin, t).norm() - oracle.get(bin, t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn stft_is_linear_in_the_input() {
        let clip = noise_clip(2000, 16_000, 5);
        let scaled = AudioClip::new(
            clip.samples().iter().map(|&v| v * 3.25).collect(),
            16_000,
        )
        .unwrap();
        let params = StftParams::default_16k();
        let a = stft(&clip, &params).unwrap();
        let b = stft(&scaled, &params).unwrap();
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            let diff = (*y - *x * num_complex::Complex::new(3.25, 0.0)).norm();
            assert!(diff <= 1e-9 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn istft_round_trip_reconstructs_interior() {
        let clip = noise_clip(16_000, 16_000, 9);
        let params = StftParams::default_16k();
        let spec = stft(&clip, &params).unwrap();
        let rec = istft(&spec, &params, 16_000).unwrap();
        // Away from the first/last window the reconstruction is exact.
        let lo = params.window_len();
        let hi = clip.len().min(rec.len()) - params.window_len();
        for i in lo..hi {
            assert!(
                (clip.samples()[i] - rec.samples()[i]).abs() < 1e-6,
                "sample {i}"
            );
        }
    }

    #[test]
    fn istft_of_zero_spectrogram_is_zero() {
        let params = StftParams::<f64>::default_16k();
        let spec = Mat::filled(params.n_bins(), 5, num_complex::Complex::new(0.0, 0.0));
        let rec = istft(&spec, &params, 16_000).unwrap();
        assert!(rec.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn istft_single_frame_recovers_frame_where_window_positive() {
        let params = StftParams::<f64>::new(64, 32, 64).unwrap();
        let clip = noise_clip(64, 16_000, 3);
        let spec = stft(&clip, &params).unwrap();
        assert_eq!(spec.cols(), 1);
        let rec = istft(&spec, &params, 16_000).unwrap();
        for i in 0..64 {
            if params.window()[i] > 1e-3 {
                assert!((rec.samples()[i] - clip.samples()[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn istft_rejects_wrong_bin_count() {
        let params = StftParams::<f64>::default_16k();
        let spec = Mat::filled(100, 5, num_complex::Complex::new(0.0, 0.0));
        assert!(matches!(
            istft(&spec, &params, 16_000),
            Err(DspError::ParamMismatch { .. })
        ));
    }

    #[test]
    fn peak_normalize_bounds_magnitudes() {
        let mut clip = AudioClip::new(vec![0.1f64, -2.0, 0.5], 16_000).unwrap();
        clip.peak_normalize(0.95);
        let peak = clip.samples().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!((peak - 0.95).abs() < 1e-12);
    }
}
