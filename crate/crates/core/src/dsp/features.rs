//! Frame-level waveform features: zero-crossing rate and amplitude envelope.

use super::{AudioClip, DspError};
use crate::scalar::{real, Real};

fn frame_starts(len: usize, frame_len: usize, hop_len: usize) -> Result<Vec<usize>, DspError> {
    if len < frame_len {
        return Err(DspError::ClipTooShort {
            len,
            needed: frame_len,
        });
    }
    assert!(hop_len > 0, "hop must be positive");
    let n_frames = 1 + (len - frame_len) / hop_len;
    Ok((0..n_frames).map(|t| t * hop_len).collect())
}

/// Per-frame fraction of strict sign changes between adjacent samples,
/// normalized by the frame length.
pub fn zero_crossing_rate<F: Real>(
    clip: &AudioClip<F>,
    frame_len: usize,
    hop_len: usize,
) -> Result<Vec<F>, DspError> {
    assert!(frame_len >= 2, "zcr needs at least two samples per frame");
    let starts = frame_starts(clip.len(), frame_len, hop_len)?;
    let samples = clip.samples();
    Ok(starts
        .into_iter()
        .map(|s| {
            let frame = &samples[s..s + frame_len];
            let crossings = frame
                .windows(2)
                .filter(|w| w[0] * w[1] < F::zero())
                .count();
            real::<F>(crossings as f64 / frame_len as f64)
        })
        .collect())
}

/// Per-frame maximum of the absolute sample values.
pub fn amplitude_envelope<F: Real>(
    clip: &AudioClip<F>,
    frame_len: usize,
    hop_len: usize,
) -> Result<Vec<F>, DspError> {
    assert!(frame_len >= 1, "envelope needs at least one sample per frame");
    let starts = frame_starts(clip.len(), frame_len, hop_len)?;
    let samples = clip.samples();
    Ok(starts
        .into_iter()
        .map(|s| {
            samples[s..s + frame_len]
                .iter()
                .fold(F::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
        })
        .collect())
}
