//! Mel-scale machinery: frequency warping, triangular filterbank,
//! log-magnitude mel spectrograms, and MFCCs.

use super::{stft, AudioClip, DspError, MelSpectrogram, StftParams};
use crate::mat::Mat;
use crate::scalar::{real, Real};

/// HTK mel scale: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel<F: Real>(f: F) -> Result<F, DspError> {
    if f < F::zero() {
        return Err(DspError::NegativeFrequency(f.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(real::<F>(2595.0) * (F::one() + f / real::<F>(700.0)).log10())
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz<F: Real>(m: F) -> Result<F, DspError> {
    if m < F::zero() {
        return Err(DspError::NegativeFrequency(m.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(real::<F>(700.0) * (real::<F>(10.0).powf(m / real::<F>(2595.0)) - F::one()))
}

/// Triangular mel filterbank `[n_mels x fft_len/2 + 1]`. Peaks sit at
/// `n_mels` points equally spaced in mel between `f_min` and `f_max`;
/// triangles are evaluated at the continuous bin center frequencies, so
/// narrow low-frequency filters never vanish.
pub fn mel_filterbank<F: Real>(
    n_mels: usize,
    fft_len: usize,
    sample_rate: u32,
    f_min: F,
    f_max: F,
) -> Result<Mat<F>, DspError> {
    assert!(n_mels >= 1, "need at least one mel filter");
    let nyquist = real::<F>(sample_rate as f64 / 2.0);
    if f_max > nyquist || f_min >= f_max || f_min < F::zero() {
        return Err(DspError::BadBand {
            f_max: f_max.to_f64().unwrap_or(f64::NAN),
            nyquist: sample_rate as f64 / 2.0,
        });
    }

    let mel_lo = hz_to_mel(f_min)?;
    let mel_hi = hz_to_mel(f_max)?;
    let step = (mel_hi - mel_lo) / real::<F>((n_mels + 1) as f64);
    let hz_points: Vec<F> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * real::<F>(i as f64)).expect("grid point in range"))
        .collect();

    let n_bins = fft_len / 2 + 1;
    let bin_hz = real::<F>(sample_rate as f64 / fft_len as f64);
    let mut fb = Mat::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (left, center, right) = (hz_points[m], hz_points[m + 1], hz_points[m + 2]);
        let row = fb.row_mut(m);
        for (k, slot) in row.iter_mut().enumerate() {
            let f = bin_hz * real::<F>(k as f64);
            if f > left && f < right {
                let up = (f - left) / (center - left);
                let down = (right - f) / (right - center);
                *slot = up.min(down).max(F::zero());
            }
        }
    }
    Ok(fb)
}

/// Center (peak) frequencies of the filterbank produced by
/// [`mel_filterbank`] with the same arguments.
pub fn mel_filter_centers<F: Real>(n_mels: usize, f_min: F, f_max: F) -> Result<Vec<F>, DspError> {
    let mel_lo = hz_to_mel(f_min)?;
    let mel_hi = hz_to_mel(f_max)?;
    let step = (mel_hi - mel_lo) / real::<F>((n_mels + 1) as f64);
    (1..=n_mels)
        .map(|i| mel_to_hz(mel_lo + step * real::<F>(i as f64)))
        .collect()
}

/// Log-magnitude mel spectrogram. Magnitudes are mel-filtered, converted to
/// dB (`20 log10`) relative to the clip maximum, and clamped to
/// `[floor_db, 0]`. A silent clip comes out at `floor_db` everywhere.
/// The band always spans 0 Hz to Nyquist.
pub fn mel_spectrogram<F: Real>(
    clip: &AudioClip<F>,
    n_mels: usize,
    params: &StftParams<F>,
    floor_db: F,
) -> Result<MelSpectrogram<F>, DspError> {
    let spec = stft(clip, params)?;
    let mag = spec.map(|c| c.norm());
    let nyquist = real::<F>(clip.sample_rate() as f64 / 2.0);
    let fb = mel_filterbank(n_mels, params.fft_len(), clip.sample_rate(), F::zero(), nyquist)?;
    let mel_mag = fb.matmul(&mag);

    let max = mel_mag.max_value();
    let twenty = real::<F>(20.0);
    let db = if max <= F::zero() {
        Mat::filled(mel_mag.rows(), mel_mag.cols(), floor_db)
    } else {
        mel_mag.map(|v| {
            if v <= F::zero() {
                floor_db
            } else {
                (twenty * (v / max).log10()).max(floor_db).min(F::zero())
            }
        })
    };
    Ok(MelSpectrogram::from_parts(
        db,
        params.clone(),
        clip.sample_rate(),
        floor_db,
    ))
}

/// MFCC matrix `[n_coeffs x n_frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix<F> {
    data: Mat<F>,
    n_coeffs: usize,
}

impl<F: Real> MfccMatrix<F> {
    pub fn data(&self) -> &Mat<F> {
        &self.data
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn n_frames(&self) -> usize {
        self.data.cols()
    }
}

/// Orthonormal DCT-II over the mel axis of each frame, keeping the first
/// `n_coeffs` coefficients.
pub fn mfcc<F: Real>(spec: &MelSpectrogram<F>, n_coeffs: usize) -> Result<MfccMatrix<F>, DspError> {
    let n_mels = spec.n_mels();
    if n_coeffs > n_mels {
        return Err(DspError::TooManyCoeffs { n_coeffs, n_mels });
    }
    let n = n_mels as f64;
    let n_frames = spec.n_frames();
    let mut out = Mat::zeros(n_coeffs, n_frames);
    // Basis[k][i] = s(k) * cos(pi (2i+1) k / 2N), s(0) = sqrt(1/N), else sqrt(2/N).
    let basis: Vec<Vec<F>> = (0..n_coeffs)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_mels)
                .map(|i| {
                    real::<F>(
                        scale
                            * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64
                                / (2.0 * n))
                                .cos(),
                    )
                })
                .collect()
        })
        .collect();
    for t in 0..n_frames {
        for (k, row) in basis.iter().enumerate() {
            let mut acc = F::zero();
            for (i, &b) in row.iter().enumerate() {
                acc += b * spec.data().get(i, t);
            }
            out.set(k, t, acc);
        }
    }
    Ok(MfccMatrix {
        data: out,
        n_coeffs,
    })
}
