//! Grayscale PGM (P5) emission for spectrogram plots: zero-dependency,
//! byte-diffable output.

use std::io::Write;
use std::path::Path;

use emostyle_core::dsp::MelSpectrogram;
use emostyle_core::Real;

/// Writes the spectrogram with mel bins bottom-to-top (low to high
/// frequency) and dB mapped linearly from `[floor_db, 0]` to `[0, 255]`.
pub fn write_pgm<F: Real>(path: &Path, spec: &MelSpectrogram<F>) -> std::io::Result<()> {
    let (h, w) = (spec.n_mels(), spec.n_frames());
    let floor = spec.floor_db().to_f64().unwrap_or(-80.0);
    let mut out = Vec::with_capacity(32 + h * w);
    out.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
    for row in 0..h {
        let bin = h - 1 - row; // top image row = highest mel bin
        for t in 0..w {
            let db = spec.data().get(bin, t).to_f64().unwrap_or(floor);
            let unit = ((db - floor) / -floor).clamp(0.0, 1.0);
            out.push((unit * 255.0).round() as u8);
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use emostyle_core::dsp::{StftParams, DEFAULT_FLOOR_DB};
    use emostyle_core::mat::Mat;

    #[test]
    fn header_and_dimensions_match_the_spectrogram() {
        let spec = MelSpectrogram::from_parts(
            Mat::filled(40, 17, -30.0f32),
            StftParams::default_16k(),
            16_000,
            DEFAULT_FLOOR_DB as f32,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pgm");
        write_pgm(&path, &spec).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n17 40\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 40 * 17);
        // -30 dB maps to (-30 + 80) / 80 of full scale.
        let expected = ((50.0 / 80.0) * 255.0_f64).round() as u8;
        assert!(bytes[header.len()..].iter().all(|&b| b == expected));
    }

    #[test]
    fn floor_maps_to_black() {
        let spec = MelSpectrogram::from_parts(
            Mat::filled(4, 3, DEFAULT_FLOOR_DB as f32),
            StftParams::default_16k(),
            16_000,
            DEFAULT_FLOOR_DB as f32,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.pgm");
        write_pgm(&path, &spec).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n3 4\n255\n";
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    }
}
