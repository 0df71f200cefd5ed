//! CLI surface contract: exit codes, deterministic file outputs, and the
//! plot/report formats.

mod common;

use common::*;
use emostyle_core::corpus::wav::write_wav_16bit_mono;
use emostyle_core::dsp::{mel_filter_centers, AudioClip};

fn sine_wav(path: &std::path::Path, freq: f64, secs: f64) {
    let n = (secs * 16_000.0) as usize;
    let samples: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::TAU * freq * i as f64 / 16_000.0).sin() * 0.8)
        .collect();
    write_wav_16bit_mono(path, &samples, 16_000).unwrap();
}

#[test]
fn usage_errors_exit_1() {
    let ws = temp_workspace("usage");
    // Same source and target emotion.
    let stderr = run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(ws.join("out"))
            .args(["train-melgan", "--manifest", "none.tsv"])
            .args(["--source", "sad", "--target", "sad"]),
        1,
    );
    assert!(stderr.contains("sad"), "{stderr}");

    // Unknown emotion name is a usage error too.
    run_expect_code(
        emostyle_bin()
            .args(["train-melgan", "--manifest", "none.tsv"])
            .args(["--source", "joyful", "--target", "sad"]),
        1,
    );

    // Unknown flag.
    run_expect_code(emostyle_bin().args(["spectrogram", "--bogus", "x"]), 1);

    // Help exits 0.
    let out = emostyle_bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_or_empty_inputs_exit_2() {
    let ws = temp_workspace("input2");
    std::fs::create_dir_all(ws.join("empty")).unwrap();

    // Empty tree: exit 2 and the message names the scanned root.
    let stderr = run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(ws.join("out"))
            .args(["manifest", "--roots"])
            .arg(ws.join("empty")),
        2,
    );
    assert!(stderr.contains("empty"), "{stderr}");

    // Unreadable WAV input.
    run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(ws.join("out"))
            .args(["spectrogram", "--input"])
            .arg(ws.join("missing.wav")),
        2,
    );

    // Garbage WAV content.
    let bad = ws.join("bad.wav");
    std::fs::write(&bad, b"not audio").unwrap();
    run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(ws.join("out"))
            .args(["spectrogram", "--input"])
            .arg(&bad),
        2,
    );
}

#[test]
fn checkpoint_kind_mismatch_exits_4() {
    let ws = temp_workspace("kind4");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 6);
    let config = ws.join("toy.toml");
    std::fs::write(&config, toy_config_text(3)).unwrap();
    let out = ws.join("out");

    run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["manifest", "--roots"])
            .arg(&corpus_dir),
    );
    run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["train-classifier", "--manifest"])
            .arg(out.join("manifest.tsv")),
    );

    let clip = corpus_dir.join("cremad").join("1001_AAA_HAP_XX.wav");
    // A classifier checkpoint is not a transfer model.
    run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["transfer", "--checkpoint"])
            .arg(out.join("classifier.ckpt"))
            .arg("--input")
            .arg(&clip),
        4,
    );

    // A truncated checkpoint is an artifact error as well.
    let bytes = std::fs::read(out.join("classifier.ckpt")).unwrap();
    let truncated = out.join("truncated.ckpt");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["transfer", "--checkpoint"])
            .arg(&truncated)
            .arg("--input")
            .arg(&clip),
        4,
    );
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let ws = temp_workspace("manifest-repro");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 5);

    let run = |out: &std::path::Path| {
        run_ok(
            emostyle_bin()
                .arg("--out")
                .arg(out)
                .args(["--seed", "9", "manifest", "--roots"])
                .arg(&corpus_dir),
        );
        std::fs::read(out.join("manifest.tsv")).unwrap()
    };
    let a = run(&ws.join("a"));
    let b = run(&ws.join("b"));
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

#[test]
fn spectrogram_images_have_exact_dimensions_and_content() {
    let ws = temp_workspace("pgm");
    let out = ws.join("out");

    // Silence: uniformly black image.
    let silence = ws.join("silence.wav");
    write_wav_16bit_mono(&silence, &vec![0.0f64; 16_000], 16_000).unwrap();
    run_ok(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["spectrogram", "--input"])
            .arg(&silence),
    );
    let bytes = std::fs::read(out.join("silence.pgm")).unwrap();
    // 16000 samples -> 1 + (16000-400)/160 = 98 frames, 40 mel rows.
    let header = b"P5\n98 40\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert!(bytes[header.len()..].iter().all(|&b| b == 0));

    // 1 kHz sine: one bright horizontal band at the filter nearest 1 kHz.
    let sine = ws.join("sine.wav");
    sine_wav(&sine, 1000.0, 1.0);
    run_ok(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["spectrogram", "--input"])
            .arg(&sine),
    );
    let bytes = std::fs::read(out.join("sine.pgm")).unwrap();
    let pixels = &bytes[header.len()..];
    let (w, h) = (98usize, 40usize);
    // Which image row is brightest, averaged across frames?
    let brightest_row = (0..h)
        .max_by_key(|&r| pixels[r * w..(r + 1) * w].iter().map(|&v| v as u32).sum::<u32>())
        .unwrap();
    // Rows are top-to-bottom high-to-low frequency.
    let centers = mel_filter_centers::<f64>(40, 0.0, 8000.0).unwrap();
    let expected_bin = centers
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - 1000.0)
                .abs()
                .partial_cmp(&(b.1 - 1000.0).abs())
                .unwrap()
        })
        .unwrap()
        .0;
    let expected_row = h - 1 - expected_bin;
    assert!(
        (brightest_row as i64 - expected_row as i64).abs() <= 1,
        "bright row {brightest_row}, expected {expected_row}"
    );
}

#[test]
fn transfer_output_is_bit_reproducible() {
    let ws = temp_workspace("transfer-repro");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 6);
    let config = ws.join("toy.toml");
    std::fs::write(&config, toy_config_text(5)).unwrap();
    let out = ws.join("out");

    run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["manifest", "--roots"])
            .arg(&corpus_dir),
    );
    run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["train-melgan", "--manifest"])
            .arg(out.join("manifest.tsv"))
            .args(["--source", "happy", "--target", "sad"]),
    );

    let clip = corpus_dir.join("cremad").join("1002_AAA_HAP_XX.wav");
    let run_transfer = |name: &str| {
        let target = ws.join(name);
        run_ok(
            emostyle_bin()
                .arg("--out")
                .arg(&out)
                .args(["transfer", "--checkpoint"])
                .arg(out.join("melgan_happy_to_sad.ckpt"))
                .arg("--input")
                .arg(&clip)
                .arg("--output")
                .arg(&target),
        );
        std::fs::read(&target).unwrap()
    };
    let a = run_transfer("a.wav");
    let b = run_transfer("b.wav");
    assert_eq!(a, b);

    // Output length within one hop of the input length.
    let wav = emostyle_core::corpus::wav::read_wav::<f32>(&ws.join("a.wav")).unwrap();
    assert!((wav.samples.len() as i64 - SEGMENT_CLIP_LEN as i64).unsigned_abs() < 160);
}

#[test]
fn features_command_writes_aligned_frames() {
    let ws = temp_workspace("features");
    let out = ws.join("out");
    let clip = ws.join("tone.wav");
    sine_wav(&clip, 440.0, 1.0);
    run_ok(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["features", "--input"])
            .arg(&clip),
    );
    let text = std::fs::read_to_string(out.join("tone.features.tsv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("frame\tenvelope\tzcr\tmfcc0"));
    assert_eq!(header.split('\t').count(), 3 + 40);
    assert_eq!(lines.count(), 98); // 1 s at the default framing
}

#[test]
fn style_transfer_runs_and_descends() {
    let ws = temp_workspace("style");
    let out = ws.join("out");
    let content = ws.join("content.wav");
    let style = ws.join("style.wav");
    sine_wav(&content, 500.0, 1.0);
    sine_wav(&style, 2500.0, 1.0);

    let config = ws.join("cfg.toml");
    std::fs::write(&config, "[style]\nsteps = 40\nn_filters = 16\n").unwrap();
    let stdout = run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["style-transfer", "--content"])
            .arg(&content)
            .arg("--style")
            .arg(&style),
    );
    assert!(stdout.contains("style transfer"), "{stdout}");
    assert!(out.join("style_content_as_style.wav").exists());
    assert!(out.join("style_content_as_style.pgm").exists());
}

#[test]
fn env_var_provides_default_corpus_root() {
    let ws = temp_workspace("envroot");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 3);
    let out = ws.join("out");
    run_ok(
        emostyle_bin()
            .env("EMOSTYLE_DATA", &corpus_dir)
            .arg("--out")
            .arg(&out)
            .arg("manifest"),
    );
    assert!(out.join("manifest.tsv").exists());

    // Without roots anywhere, it is a usage error.
    run_expect_code(
        emostyle_bin()
            .env_remove("EMOSTYLE_DATA")
            .arg("--out")
            .arg(&out)
            .arg("manifest"),
        1,
    );
}

#[test]
fn exclude_dataset_flag_filters_training_data() {
    let ws = temp_workspace("exclude");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 6);
    // Add TESS-named clips that would otherwise join training.
    let tess = corpus_dir.join("tess");
    std::fs::create_dir_all(&tess).unwrap();
    for (i, word) in ["back", "bar", "base"].iter().enumerate() {
        let clip: AudioClip<f64> =
            band_noise_clip(LOW_BAND, 900 + i as u64, SEGMENT_CLIP_LEN, 16_000);
        write_wav_16bit_mono(
            &tess.join(format!("OAF_{word}_neutral.wav")),
            clip.samples(),
            16_000,
        )
        .unwrap();
    }
    let config = ws.join("toy.toml");
    std::fs::write(&config, toy_config_text(3)).unwrap();
    let out = ws.join("out");
    run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["manifest", "--roots"])
            .arg(&corpus_dir),
    );
    let with_tess = run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["train-classifier", "--manifest"])
            .arg(out.join("manifest.tsv")),
    );
    let without_tess = run_ok(
        emostyle_bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["train-classifier", "--manifest"])
            .arg(out.join("manifest.tsv"))
            .args(["--exclude-dataset", "tess"]),
    );
    let count = |s: &str| -> usize {
        s.lines()
            .find(|l| l.starts_with("training classifier on"))
            .and_then(|l| l.split_whitespace().nth(3).and_then(|n| n.parse().ok()))
            .unwrap()
    };
    assert!(count(&with_tess) > count(&without_tess));

    // Unknown dataset name is a usage error.
    run_expect_code(
        emostyle_bin()
            .arg("--out")
            .arg(&out)
            .args(["train-classifier", "--manifest"])
            .arg(out.join("manifest.tsv"))
            .args(["--exclude-dataset", "librispeech"]),
        1,
    );
}

#[test]
fn effective_config_dump_reloads_to_an_equivalent_run() {
    let ws = temp_workspace("config-dump");
    let corpus_dir = ws.join("corpus");
    write_toy_corpus(&corpus_dir, 6);
    let config = ws.join("toy.toml");
    std::fs::write(&config, toy_config_text(13)).unwrap();

    let train = |cfg: &std::path::Path, out: &std::path::Path| {
        run_ok(
            emostyle_bin()
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(out)
                .args(["manifest", "--roots"])
                .arg(&corpus_dir),
        );
        run_ok(
            emostyle_bin()
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(out)
                .args(["train-melgan", "--manifest"])
                .arg(out.join("manifest.tsv"))
                .args(["--source", "happy", "--target", "sad"]),
        );
    };
    let out_a = ws.join("a");
    train(&config, &out_a);
    // Re-run from the dumped effective config: identical artifacts.
    let dumped = out_a.join("effective_config.toml");
    let out_b = ws.join("b");
    train(&dumped, &out_b);

    let a = std::fs::read(out_a.join("melgan_happy_to_sad.ckpt")).unwrap();
    let b = std::fs::read(out_b.join("melgan_happy_to_sad.ckpt")).unwrap();
    assert_eq!(a, b);
}
