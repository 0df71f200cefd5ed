//! Minimal RIFF/WAVE codec: reads PCM 16-bit and IEEE float 32-bit, one or
//! two channels; writes 16-bit PCM mono. Unknown chunks are skipped.

use std::io::{Read, Write};
use std::path::Path;

use super::CorpusError;
use crate::scalar::{real, Real};

pub struct WavData<F> {
    pub channels: u16,
    pub sample_rate: u32,
    /// Interleaved samples scaled to `[-1, 1]`.
    pub samples: Vec<F>,
}

fn read_u16(b: &[u8], at: usize) -> Result<u16, CorpusError> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| CorpusError::CorruptFile("truncated header field".into()))
}

fn read_u32(b: &[u8], at: usize) -> Result<u32, CorpusError> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| CorpusError::CorruptFile("truncated header field".into()))
}

pub fn read_wav<F: Real>(path: &Path) -> Result<WavData<F>, CorpusError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(CorpusError::CorruptFile(format!(
            "{}: not a RIFF/WAVE file",
            path.display()
        )));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(&bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(CorpusError::CorruptFile("fmt chunk too short".into()));
                }
                fmt = Some((
                    read_u16(&bytes, body_start)?,
                    read_u16(&bytes, body_start + 2)?,
                    read_u32(&bytes, body_start + 4)?,
                    read_u16(&bytes, body_start + 14)?,
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_start + size + (size & 1);
    }

    let (format, channels, sample_rate, bits) = fmt.ok_or_else(|| {
        CorpusError::CorruptFile(format!("{}: missing fmt chunk", path.display()))
    })?;
    let data = data.ok_or_else(|| {
        CorpusError::CorruptFile(format!("{}: missing data chunk", path.display()))
    })?;
    if !(1..=2).contains(&channels) {
        return Err(CorpusError::UnsupportedCodec(format!(
            "{} channels",
            channels
        )));
    }

    let samples = match (format, bits) {
        (1, 16) => data
            .chunks_exact(2)
            .map(|c| real::<F>(i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0))
            .collect(),
        (3, 32) => data
            .chunks_exact(4)
            .map(|c| real::<F>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
        (f, b) => {
            return Err(CorpusError::UnsupportedCodec(format!(
                "format {f} with {b} bits (need PCM16 or float32)"
            )))
        }
    };
    Ok(WavData {
        channels,
        sample_rate,
        samples,
    })
}

/// Writes mono 16-bit PCM; samples are clamped to `[-1, 1]`.
pub fn write_wav_16bit_mono<F: Real>(
    path: &Path,
    samples: &[F],
    sample_rate: u32,
) -> Result<(), CorpusError> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        let v = s.to_f64().unwrap_or(0.0).clamp(-1.0, 1.0);
        let q = (v * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Hand-rolled 16-bit stereo writer for test fixtures. Test-only.
#[cfg(test)]
pub fn write_wav_16bit_stereo(path: &Path, left: &[i16], right: &[i16], sample_rate: u32) {
    assert_eq!(left.len(), right.len());
    let data_len = (left.len() * 4) as u32;
    let mut out = Vec::new();
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 4).to_le_bytes());
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for (l, r) in left.iter().zip(right.iter()) {
        out.extend_from_slice(&l.to_le_bytes());
        out.extend_from_slice(&r.to_le_bytes());
    }
    std::fs::write(path, out).unwrap();
}
