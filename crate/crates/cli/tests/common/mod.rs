//! Shared fixtures: synthetic band-limited audio domains and a toy corpus
//! tree with CREMA-D-style names. Each test target uses a subset.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use emostyle_core::corpus::wav::write_wav_16bit_mono;
use emostyle_core::dsp::AudioClip;
use emostyle_core::rng::SeededRng;

/// Frequency bands (Hz) that land in clearly separated mel regions at 16 kHz.
pub const LOW_BAND: (f64, f64) = (360.0, 1050.0);
pub const HIGH_BAND: (f64, f64) = (3000.0, 5300.0);

/// Six well-separated bands for the classifier capacity tests.
pub const SIX_BANDS: [(f64, f64); 6] = [
    (100.0, 350.0),
    (500.0, 900.0),
    (1200.0, 1700.0),
    (2100.0, 2700.0),
    (3300.0, 4100.0),
    (5000.0, 6200.0),
];

/// Exactly 128 analysis frames at the default 400/160 framing.
pub const SEGMENT_CLIP_LEN: usize = 400 + 127 * 160;

/// Band-limited noise: a sum of seeded random-phase sines inside `band`.
pub fn band_noise_clip<F: emostyle_core::Real>(
    band: (f64, f64),
    seed: u64,
    len: usize,
    sample_rate: u32,
) -> AudioClip<F> {
    let mut rng = SeededRng::new(seed);
    let tones: Vec<(f64, f64, f64)> = (0..30)
        .map(|_| {
            (
                rng.uniform(band.0, band.1),
                rng.uniform(0.0, std::f64::consts::TAU),
                rng.uniform(0.5, 1.0),
            )
        })
        .collect();
    let mut samples: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            tones
                .iter()
                .map(|&(f, p, a)| a * (std::f64::consts::TAU * f * t + p).sin())
                .sum::<f64>()
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for s in &mut samples {
        *s = *s / peak * 0.9;
    }
    AudioClip::new(
        samples
            .into_iter()
            .map(|v| emostyle_core::scalar::real::<F>(v))
            .collect(),
        sample_rate,
    )
    .unwrap()
}

/// Writes a toy corpus: `n_per_class` happy (low-band) and sad (high-band)
/// clips under CREMA-D naming, one segment-width clip each.
pub fn write_toy_corpus(dir: &Path, n_per_class: usize) {
    let cremad = dir.join("cremad");
    std::fs::create_dir_all(&cremad).unwrap();
    for i in 0..n_per_class {
        let happy: AudioClip<f64> =
            band_noise_clip(LOW_BAND, 1000 + i as u64, SEGMENT_CLIP_LEN, 16_000);
        write_wav_16bit_mono(
            &cremad.join(format!("{:04}_AAA_HAP_XX.wav", 1001 + i)),
            happy.samples(),
            16_000,
        )
        .unwrap();
        let sad: AudioClip<f64> =
            band_noise_clip(HIGH_BAND, 2000 + i as u64, SEGMENT_CLIP_LEN, 16_000);
        write_wav_16bit_mono(
            &cremad.join(format!("{:04}_AAA_SAD_XX.wav", 1001 + i)),
            sad.samples(),
            16_000,
        )
        .unwrap();
    }
}

/// Small-but-real training configuration for CLI pipeline tests.
pub fn toy_config_text(seed: u64) -> String {
    format!(
        r#"
[run]
seed = {seed}
out_dir = "out"

[corpus]
test_per_class = 4

[melgan]
depth = 2
base_channels = 4
embedding_dim = 16
epochs = 2
batch_size = 4
max_steps = 24

[classifier]
epochs = 40
batch_size = 8
learning_rate = 1e-3
"#
    )
}

pub fn emostyle_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emostyle"))
}

pub fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn emostyle");
    assert!(
        output.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn run_expect_code(cmd: &mut Command, code: i32) -> String {
    let output = cmd.output().expect("spawn emostyle");
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn temp_workspace(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("emostyle-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
