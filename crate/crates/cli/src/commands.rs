//! Subcommand implementations, each a thin orchestration over the core
//! library with all file formats pinned here.

use std::path::{Path, PathBuf};

use emostyle_core::checkpoint::{self, load_classifier, load_melgan};
use emostyle_core::classifier::{
    judge_transfer, train_classifier, EmotionLabel, EvalReport, FeatureDataset,
};
use emostyle_core::config::RunConfig;
use emostyle_core::corpus::{self, wav, DatasetKind, Manifest, Split};
use emostyle_core::dsp::{
    amplitude_envelope, griffin_lim_mel, mel_spectrogram, mfcc, zero_crossing_rate, PhaseInit,
};
use emostyle_core::melgan::{self, segment, transfer_with_spectrograms, SpectrogramSegment};
use emostyle_core::neural_style::{style_loss_report, style_transfer};
use emostyle_core::{AudioClip32, ClassifierModel32, MelganModel32, MelSpectrogram32};

use crate::error::CliError;
use crate::pgm::write_pgm;

pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn dump_effective_config(&self) -> Result<(), CliError> {
        let text = self.config.to_toml()?;
        std::fs::write(self.out_path("effective_config.toml"), text)?;
        Ok(())
    }

    fn load_clip(&self, path: &Path) -> Result<AudioClip32, CliError> {
        Ok(corpus::load_audio::<f32>(path, self.config.dsp.sample_rate)?)
    }

    fn mel(&self, clip: &AudioClip32) -> Result<MelSpectrogram32, CliError> {
        let params = self.config.dsp.stft_params::<f32>()?;
        Ok(mel_spectrogram(
            clip,
            self.config.dsp.n_mels,
            &params,
            self.config.dsp.floor::<f32>(),
        )?)
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

pub fn cmd_manifest(ctx: &Ctx, roots: &[PathBuf]) -> Result<(), CliError> {
    let roots: Vec<PathBuf> = if roots.is_empty() {
        resolve_default_roots(&ctx.config)?
    } else {
        roots.to_vec()
    };
    let (mut manifest, summary) = corpus::build_manifest(&roots)?;
    let split_summary = corpus::split(
        &mut manifest,
        ctx.config.corpus.test_per_class,
        ctx.config.run.seed,
    );

    let out_file = ctx.out_path("manifest.tsv");
    manifest.write(&out_file)?;

    println!("manifest: {} entries -> {}", manifest.len(), out_file.display());
    for kind in DatasetKind::ALL {
        if let Some(n) = summary.per_dataset.get(&kind) {
            println!("  {kind}: {n}");
        }
    }
    let counts = corpus::class_counts(&manifest);
    for label in EmotionLabel::ALL {
        println!(
            "  {label}: {} ({} test)",
            counts.per_class[label.code()],
            split_summary.test_per_class[label.code()]
        );
    }
    println!("  excluded (surprise codes): {}", summary.excluded);
    for path in &summary.unparseable {
        eprintln!("warning: unparseable file name: {}", path.display());
    }
    for w in &split_summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn resolve_default_roots(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if !config.corpus.roots.is_empty() {
        return Ok(config.corpus.roots.iter().map(PathBuf::from).collect());
    }
    match std::env::var("EMOSTYLE_DATA") {
        Ok(dir) if !dir.is_empty() => Ok(vec![PathBuf::from(dir)]),
        _ => Err(CliError::Usage(
            "no corpus roots: pass --roots, set corpus.roots in the config, or export EMOSTYLE_DATA"
                .into(),
        )),
    }
}

pub fn cmd_features(ctx: &Ctx, input: &Path) -> Result<(), CliError> {
    let clip = ctx.load_clip(input)?;
    let dsp = &ctx.config.dsp;
    let params = dsp.stft_params::<f32>()?;
    let envelope = amplitude_envelope(&clip, dsp.window_len, dsp.hop_len)?;
    let zcr = zero_crossing_rate(&clip, dsp.window_len, dsp.hop_len)?;
    let spec = ctx.mel(&clip)?;
    let coeffs = mfcc(&spec, ctx.config.classifier.n_coeffs)?;
    debug_assert_eq!(params.n_frames(clip.len())?, coeffs.n_frames());

    let mut text = String::from("frame\tenvelope\tzcr");
    for k in 0..coeffs.n_coeffs() {
        text.push_str(&format!("\tmfcc{k}"));
    }
    text.push('\n');
    for t in 0..coeffs.n_frames() {
        text.push_str(&format!("{t}\t{:.6}\t{:.6}", envelope[t], zcr[t]));
        for k in 0..coeffs.n_coeffs() {
            text.push_str(&format!("\t{:.6}", coeffs.data().get(k, t)));
        }
        text.push('\n');
    }
    let out_file = ctx.out_path(&format!("{}.features.tsv", file_stem(input)));
    std::fs::write(&out_file, text)?;
    println!(
        "features: {} frames x (envelope, zcr, {} mfcc) -> {}",
        coeffs.n_frames(),
        coeffs.n_coeffs(),
        out_file.display()
    );
    Ok(())
}

pub fn cmd_train_classifier(
    ctx: &Ctx,
    manifest_path: &Path,
    exclude_datasets: &[String],
) -> Result<(), CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let excluded: Vec<DatasetKind> = exclude_datasets
        .iter()
        .map(|s| s.parse().map_err(CliError::Usage))
        .collect::<Result<_, _>>()?;

    let mut data = FeatureDataset::<f32>::default();
    for entry in manifest.iter_split(Split::Train) {
        if excluded.contains(&entry.dataset) {
            continue;
        }
        let clip = ctx.load_clip(&entry.path)?;
        let features = emostyle_core::classifier::featurize(
            &clip,
            &ctx.config.dsp,
            ctx.config.classifier.n_coeffs,
        )?;
        data.push(features, entry.emotion);
    }
    println!("training classifier on {} clips", data.len());

    let (model, history) = train_classifier(
        &data,
        &ctx.config.classifier,
        &ctx.config.dsp,
        ctx.config.run.seed,
    )?;
    let mut log = String::from("epoch\tloss\taccuracy\n");
    for s in &history {
        println!("epoch {}: loss {:.4}, accuracy {:.3}", s.epoch, s.loss, s.accuracy);
        log.push_str(&format!("{}\t{:.6}\t{:.6}\n", s.epoch, s.loss, s.accuracy));
    }
    std::fs::write(ctx.out_path("classifier_history.tsv"), log)?;

    let ckpt = ctx.out_path("classifier.ckpt");
    checkpoint::save_classifier(&model, &ckpt)?;
    ctx.dump_effective_config()?;
    println!("saved {}", ckpt.display());
    Ok(())
}

/// Loads all train-split clips of one emotion and segments their mel
/// spectrograms.
fn segment_pool(
    ctx: &Ctx,
    manifest: &Manifest,
    emotion: EmotionLabel,
) -> Result<Vec<SpectrogramSegment<f32>>, CliError> {
    let mut pool = Vec::new();
    for entry in manifest.iter_split(Split::Train) {
        if entry.emotion != emotion {
            continue;
        }
        let clip = ctx.load_clip(&entry.path)?;
        let spec = ctx.mel(&clip)?;
        pool.extend(segment(&spec, ctx.config.melgan.seg_frames)?);
    }
    Ok(pool)
}

pub fn cmd_train_melgan(
    ctx: &Ctx,
    manifest_path: &Path,
    source: EmotionLabel,
    target: EmotionLabel,
) -> Result<(), CliError> {
    if source == target {
        return Err(CliError::Usage(format!(
            "source and target emotion are both '{source}'"
        )));
    }
    let manifest = Manifest::load(manifest_path)?;
    let source_pool = segment_pool(ctx, &manifest, source)?;
    let target_pool = segment_pool(ctx, &manifest, target)?;
    println!(
        "training melgan {source}->{target}: {} source segments, {} target segments",
        source_pool.len(),
        target_pool.len()
    );

    let stem = format!("melgan_{source}_to_{target}");
    let out_dir = ctx.out_dir.clone();
    let epoch_stem = stem.clone();
    let (model, report) = melgan::train_pair(
        &source_pool,
        &target_pool,
        (source, target),
        &ctx.config.melgan,
        &ctx.config.dsp,
        ctx.config.run.seed,
        move |epoch, model| {
            let path = out_dir.join(format!("{epoch_stem}.epoch{:03}.ckpt", epoch + 1));
            checkpoint::save_melgan(model, &path)
                .map_err(|e| melgan::MelganError::Config(e.to_string()))
        },
    )?;

    let mut log = String::new();
    for (step, l) in report.history.iter().enumerate() {
        log.push_str(&format!(
            "{step}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            l.loss_d, l.loss_g_adv, l.loss_travel, l.loss_margin
        ));
    }
    std::fs::write(ctx.out_path(&format!("{stem}.losses.tsv")), log)?;

    let ckpt = ctx.out_path(&format!("{stem}.ckpt"));
    checkpoint::save_melgan(&model, &ckpt)?;
    ctx.dump_effective_config()?;
    println!(
        "saved {} after {} generator / {} discriminator updates",
        ckpt.display(),
        report.gen_updates,
        report.disc_updates
    );
    Ok(())
}

pub fn cmd_style_transfer(ctx: &Ctx, content: &Path, style: &Path) -> Result<(), CliError> {
    let content_clip = ctx.load_clip(content)?;
    let style_clip = ctx.load_clip(style)?;
    let content_mel = ctx.mel(&content_clip)?;
    let style_mel = ctx.mel(&style_clip)?;

    let (result, history) = style_transfer(
        &content_mel,
        &style_mel,
        &ctx.config.style,
        ctx.config.run.seed,
    )?;
    let (c_loss, s_loss) = style_loss_report(
        &result,
        &content_mel,
        &style_mel,
        &ctx.config.style,
        ctx.config.run.seed,
    )?;
    println!(
        "style transfer: total loss {:.4} -> {:.4} over {} steps (content {:.4}, style {:.4})",
        history.first().copied().unwrap_or(0.0),
        history.last().copied().unwrap_or(0.0),
        history.len(),
        c_loss,
        s_loss
    );

    let (audio, _) = griffin_lim_mel(
        &result,
        ctx.config.dsp.griffin_lim_iterations,
        PhaseInit::Zero,
    )?;
    let stem = format!("style_{}_as_{}", file_stem(content), file_stem(style));
    let wav_path = ctx.out_path(&format!("{stem}.wav"));
    wav::write_wav_16bit_mono(&wav_path, audio.samples(), audio.sample_rate())?;
    write_pgm(&ctx.out_path(&format!("{stem}.pgm")), &result)?;
    ctx.dump_effective_config()?;
    println!("wrote {}", wav_path.display());
    Ok(())
}

pub fn cmd_transfer(
    ctx: &Ctx,
    checkpoint_path: &Path,
    input: &Path,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let model: MelganModel32 = load_melgan(checkpoint_path)?;
    let clip = ctx.load_clip(input)?;
    let (audio, mel_in, mel_out) = transfer_with_spectrograms(&model, &clip)?;

    let out_wav = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out_path(&format!("{}.transferred.wav", file_stem(input))));
    wav::write_wav_16bit_mono(&out_wav, audio.samples(), audio.sample_rate())?;

    let stem = out_wav
        .with_extension("")
        .to_string_lossy()
        .into_owned();
    write_pgm(Path::new(&format!("{stem}_before.pgm")), &mel_in)?;
    write_pgm(Path::new(&format!("{stem}_after.pgm")), &mel_out)?;
    println!(
        "transferred {} -> {} ({} -> {} samples, {} frames)",
        input.display(),
        out_wav.display(),
        clip.len(),
        audio.len(),
        mel_out.n_frames()
    );
    Ok(())
}

pub fn cmd_evaluate(
    ctx: &Ctx,
    classifier_path: &Path,
    melgan_path: &Path,
    manifest_path: &Path,
    target_override: Option<EmotionLabel>,
) -> Result<(), CliError> {
    let judge: ClassifierModel32 = load_classifier(classifier_path)?;
    let model: MelganModel32 = load_melgan(melgan_path)?;
    let manifest = Manifest::load(manifest_path)?;

    let source = model.pair.0;
    let target = target_override.unwrap_or(model.pair.1);
    let entries: Vec<_> = manifest
        .iter_split(Split::Test)
        .filter(|e| e.emotion == source)
        .collect();
    if entries.is_empty() {
        return Err(CliError::Input(format!(
            "empty test split for source emotion '{source}' in {}",
            manifest_path.display()
        )));
    }

    let mut generated = Vec::with_capacity(entries.len());
    for entry in &entries {
        let clip = ctx.load_clip(&entry.path)?;
        generated.push(melgan::transfer(&model, &clip)?);
    }
    let (fraction, report) = judge_transfer(&judge, &generated, target)?;

    let name = format!("MelGAN {} to {}", source.title(), target.title());
    let table = format!("Model | Accuracy | F1\n{}\n", report.table_row(&name));
    print!("{table}");
    println!(
        "({} of {} clips judged as {target})",
        (fraction * entries.len() as f64).round() as usize,
        entries.len()
    );
    std::fs::write(ctx.out_path("evaluation.txt"), &table)?;
    std::fs::write(ctx.out_path("confusion.csv"), report.confusion_csv())?;
    write_eval_report(&ctx.out_path("evaluation_detail.txt"), &report)?;
    Ok(())
}

fn write_eval_report(path: &Path, report: &EvalReport) -> Result<(), CliError> {
    let text = format!(
        "accuracy: {:.4}\nmacro_f1: {:.4}\nrow_sums: {:?}\n",
        report.accuracy,
        report.macro_f1,
        report.row_sums()
    );
    std::fs::write(path, text)?;
    Ok(())
}

pub fn cmd_spectrogram(ctx: &Ctx, input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let clip = ctx.load_clip(input)?;
    let spec = ctx.mel(&clip)?;
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out_path(&format!("{}.pgm", file_stem(input))));
    write_pgm(&out, &spec)?;
    println!(
        "spectrogram: {} mel bins x {} frames -> {}",
        spec.n_mels(),
        spec.n_frames(),
        out.display()
    );
    Ok(())
}
