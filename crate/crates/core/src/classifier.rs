//! MFCC emotion classifier: the automated judge for generated audio.
//!
//! Features are time-pooled MFCCs (per-coefficient mean and standard
//! deviation), classified by a dense stack `input -> 128 -> 256 -> 256 -> 6`
//! with ReLU activations and a softmax head.

use thiserror::Error;

use crate::autograd::{AdamState, AutogradError, Tensor};
use crate::config::{ClassifierSection, DspSection};
use crate::dsp::{mel_spectrogram, mfcc, AudioClip, DspError};
use crate::nn::{Dense, Init};
use crate::rng::SeededRng;
use crate::scalar::{real, Real};

pub const N_CLASSES: usize = 6;

/// The six emotions, coded alphabetically. "surprise" is rejected at corpus
/// ingest and never reaches this enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Anger = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Neutral = 4,
    Sad = 5,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; N_CLASSES] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Neutral,
        EmotionLabel::Sad,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// Capitalized form for report tables.
    pub fn title(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Happy => "Happy",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Sad => "Sad",
        }
    }
}

impl std::fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Sad => "sad",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for EmotionLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "anger" | "angry" => Ok(EmotionLabel::Anger),
            "disgust" | "disgusted" => Ok(EmotionLabel::Disgust),
            "fear" | "fearful" => Ok(EmotionLabel::Fear),
            "happy" | "happiness" => Ok(EmotionLabel::Happy),
            "neutral" => Ok(EmotionLabel::Neutral),
            "sad" | "sadness" => Ok(EmotionLabel::Sad),
            other => Err(format!("unknown emotion '{other}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty input")]
    EmptyInput,
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NanLoss { epoch: usize, step: usize },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Autograd(#[from] AutogradError),
}

/// Pooled MFCC feature vector: per-coefficient mean over frames concatenated
/// with per-coefficient (population) standard deviation.
pub fn featurize<F: Real>(
    clip: &AudioClip<F>,
    dsp: &DspSection,
    n_coeffs: usize,
) -> Result<Vec<F>, DspError> {
    let params = dsp.stft_params::<F>()?;
    let spec = mel_spectrogram(clip, dsp.n_mels, &params, dsp.floor::<F>())?;
    let coeffs = mfcc(&spec, n_coeffs)?;
    let n_frames = coeffs.n_frames();
    let inv = real::<F>(1.0 / n_frames as f64);

    let mut out = vec![F::zero(); 2 * n_coeffs];
    for k in 0..n_coeffs {
        let row = coeffs.data().row(k);
        let mean = row.iter().fold(F::zero(), |a, &v| a + v) * inv;
        let var = row
            .iter()
            .fold(F::zero(), |a, &v| a + (v - mean) * (v - mean))
            * inv;
        out[k] = mean;
        out[n_coeffs + k] = var.sqrt();
    }
    Ok(out)
}

/// Labeled feature vectors ready for training or evaluation.
#[derive(Debug, Clone, Default)]
pub struct FeatureDataset<F> {
    pub features: Vec<Vec<F>>,
    pub labels: Vec<EmotionLabel>,
}

impl<F: Real> FeatureDataset<F> {
    pub fn push(&mut self, features: Vec<F>, label: EmotionLabel) {
        self.features.push(features);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes_present(&self) -> usize {
        let mut seen = [false; N_CLASSES];
        for l in &self.labels {
            seen[l.code()] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

/// Dense emotion classifier with the fixed layer plan
/// `input_dim -> 128 -> 256 -> 256 -> 6`.
pub struct ClassifierModel<F: Real> {
    pub cfg: ClassifierSection,
    pub dsp: DspSection,
    pub seed: u64,
    pub input_dim: usize,
    pub l1: Dense<F>,
    pub l2: Dense<F>,
    pub l3: Dense<F>,
    pub head: Dense<F>,
}

impl<F: Real> ClassifierModel<F> {
    pub fn new(cfg: &ClassifierSection, dsp: &DspSection, seed: u64) -> Self {
        let input_dim = 2 * cfg.n_coeffs;
        let mut rng = SeededRng::derive(seed, 0xC1A5);
        Self {
            cfg: cfg.clone(),
            dsp: dsp.clone(),
            seed,
            input_dim,
            l1: Dense::new(input_dim, 128, Init::HeUniform, &mut rng),
            l2: Dense::new(128, 256, Init::HeUniform, &mut rng),
            l3: Dense::new(256, 256, Init::HeUniform, &mut rng),
            head: Dense::new(256, N_CLASSES, Init::GlorotUniform, &mut rng),
        }
    }

    pub fn params(&self) -> Vec<Tensor<F>> {
        [
            self.l1.params(),
            self.l2.params(),
            self.l3.params(),
            self.head.params(),
        ]
        .concat()
    }

    pub fn logits(&self, x: &Tensor<F>) -> Result<Tensor<F>, AutogradError> {
        let h1 = self.l1.forward(x)?.relu();
        let h2 = self.l2.forward(&h1)?.relu();
        let h3 = self.l3.forward(&h2)?.relu();
        self.head.forward(&h3)
    }

    pub fn featurize(&self, clip: &AudioClip<F>) -> Result<Vec<F>, DspError> {
        featurize(clip, &self.dsp, self.cfg.n_coeffs)
    }

    /// Label and softmax probabilities for one feature vector. Ties go to
    /// the lowest class code.
    pub fn predict_features(
        &self,
        features: &[F],
    ) -> Result<(EmotionLabel, Vec<F>), ClassifierError> {
        if features.len() != self.input_dim {
            return Err(ClassifierError::DimMismatch {
                expected: self.input_dim,
                got: features.len(),
            });
        }
        let x = Tensor::constant(features.to_vec(), &[1, self.input_dim])?;
        let probs = self.logits(&x)?.softmax(1)?.values();
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok((EmotionLabel::from_code(best).expect("6 classes"), probs))
    }

    pub fn predict(&self, clip: &AudioClip<F>) -> Result<(EmotionLabel, Vec<F>), ClassifierError> {
        let features = self.featurize(clip)?;
        self.predict_features(&features)
    }

    pub fn state_dict(&self) -> Vec<(String, Vec<usize>, Vec<F>)> {
        let mut out = Vec::new();
        for (name, layer) in [
            ("l1", &self.l1),
            ("l2", &self.l2),
            ("l3", &self.l3),
            ("head", &self.head),
        ] {
            out.push((format!("{name}.weight"), layer.weight.shape(), layer.weight.values()));
            out.push((format!("{name}.bias"), layer.bias.shape(), layer.bias.values()));
        }
        out
    }

    pub fn load_state_dict(
        &mut self,
        tensors: &[(String, Vec<usize>, Vec<F>)],
    ) -> Result<(), AutogradError> {
        for (name, shape, values) in tensors {
            let target = match name.as_str() {
                "l1.weight" => &self.l1.weight,
                "l1.bias" => &self.l1.bias,
                "l2.weight" => &self.l2.weight,
                "l2.bias" => &self.l2.bias,
                "l3.weight" => &self.l3.weight,
                "l3.bias" => &self.l3.bias,
                "head.weight" => &self.head.weight,
                "head.bias" => &self.head.bias,
                other => {
                    return Err(AutogradError::ShapeMismatch(format!(
                        "unknown classifier tensor '{other}'"
                    )))
                }
            };
            if *shape != target.shape() {
                return Err(AutogradError::ShapeMismatch(format!(
                    "{name}: checkpoint shape {shape:?} vs model {:?}",
                    target.shape()
                )));
            }
            target.set_values(values.clone())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Cross-entropy training with Adam and a seeded per-epoch shuffle.
/// Returns the trained model and per-epoch train loss/accuracy.
pub fn train_classifier<F: Real>(
    data: &FeatureDataset<F>,
    cfg: &ClassifierSection,
    dsp: &DspSection,
    seed: u64,
) -> Result<(ClassifierModel<F>, Vec<EpochStats>), ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if data.n_classes_present() < 2 {
        return Err(ClassifierError::SingleClass);
    }
    let model = ClassifierModel::new(cfg, dsp, seed);
    for f in &data.features {
        if f.len() != model.input_dim {
            return Err(ClassifierError::DimMismatch {
                expected: model.input_dim,
                got: f.len(),
            });
        }
    }

    let params = model.params();
    let mut adam = AdamState::new(
        real::<F>(cfg.learning_rate),
        real::<F>(cfg.beta1),
        real::<F>(cfg.beta2),
        &params,
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    let n = data.len();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        SeededRng::derive(seed, 1 + epoch as u64).shuffle(&mut order);

        let mut epoch_loss = 0.0f64;
        for (step, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let bs = chunk.len();
            let mut x_vals = Vec::with_capacity(bs * model.input_dim);
            let mut labels = Vec::with_capacity(bs);
            for &i in chunk {
                x_vals.extend_from_slice(&data.features[i]);
                labels.push(data.labels[i].code());
            }
            let x = Tensor::constant(x_vals, &[bs, model.input_dim])?;
            for p in &params {
                p.zero_grad();
            }
            let loss = model.logits(&x)?.cross_entropy(&labels)?;
            let loss_val = loss.item().to_f64().unwrap_or(f64::NAN);
            if !loss_val.is_finite() {
                return Err(ClassifierError::NanLoss { epoch, step });
            }
            loss.backward()?;
            adam.step(&params)?;
            epoch_loss += loss_val * bs as f64;
        }

        // Post-update training accuracy.
        let mut correct = 0usize;
        for i in 0..n {
            let (label, _) = model.predict_features(&data.features[i])?;
            if label == data.labels[i] {
                correct += 1;
            }
        }
        history.push(EpochStats {
            epoch,
            loss: epoch_loss / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    Ok((model, history))
}

/// Accuracy, macro F1, and the 6x6 confusion matrix (rows true, cols
/// predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
}

impl EvalReport {
    /// Macro F1 averages per-class F1 over every class that appears in the
    /// true labels or the predictions; a class that appears but has no true
    /// positives contributes 0.
    pub fn from_confusion(confusion: [[usize; N_CLASSES]; N_CLASSES]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
        let accuracy = if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        };

        let mut f1_sum = 0.0;
        let mut considered = 0usize;
        for k in 0..N_CLASSES {
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = (0..N_CLASSES).map(|i| confusion[i][k]).sum();
            if support == 0 && predicted == 0 {
                continue;
            }
            considered += 1;
            let tp = confusion[k][k];
            if tp > 0 {
                let precision = tp as f64 / predicted as f64;
                let recall = tp as f64 / support as f64;
                f1_sum += 2.0 * precision * recall / (precision + recall);
            }
        }
        let macro_f1 = if considered == 0 {
            0.0
        } else {
            f1_sum / considered as f64
        };
        Self {
            accuracy,
            macro_f1,
            confusion,
        }
    }

    pub fn row_sums(&self) -> [usize; N_CLASSES] {
        let mut sums = [0; N_CLASSES];
        for (k, row) in self.confusion.iter().enumerate() {
            sums[k] = row.iter().sum();
        }
        sums
    }

    /// One `Model | Accuracy | F1` row, percentages with one decimal.
    pub fn table_row(&self, model_name: &str) -> String {
        format!(
            "{model_name} | {:.1} | {:.1}",
            self.accuracy * 100.0,
            self.macro_f1 * 100.0
        )
    }

    /// Confusion matrix as CSV with labeled header row and column.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in EmotionLabel::ALL {
            out.push(',');
            out.push_str(&l.to_string());
        }
        out.push('\n');
        for (k, row) in self.confusion.iter().enumerate() {
            out.push_str(&EmotionLabel::ALL[k].to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the model over a labeled dataset and tallies the confusion matrix.
pub fn evaluate<F: Real>(
    model: &ClassifierModel<F>,
    data: &FeatureDataset<F>,
) -> Result<EvalReport, ClassifierError> {
    if data.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    for (f, l) in data.features.iter().zip(data.labels.iter()) {
        let (pred, _) = model.predict_features(f)?;
        confusion[l.code()][pred.code()] += 1;
    }
    Ok(EvalReport::from_confusion(confusion))
}

/// Judges generated clips against an intended target emotion: every clip is
/// treated as truly `target`, so accuracy is the fraction labeled as target.
pub fn judge_transfer<F: Real>(
    model: &ClassifierModel<F>,
    clips: &[AudioClip<F>],
    target: EmotionLabel,
) -> Result<(f64, EvalReport), ClassifierError> {
    if clips.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    for clip in clips {
        let (pred, _) = model.predict(clip)?;
        confusion[target.code()][pred.code()] += 1;
    }
    let report = EvalReport::from_confusion(confusion);
    Ok((report.accuracy, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftParams;

    fn default_sections() -> (ClassifierSection, DspSection) {
        (ClassifierSection::default(), DspSection::default())
    }

    /// Band-limited noise: a sum of seeded random-phase sines inside one
    /// frequency band per class.
    pub fn band_noise_clip(band: (f64, f64), seed: u64, n: usize, sr: u32) -> AudioClip<f64> {
        let mut rng = SeededRng::new(seed);
        let n_tones = 24;
        let tones: Vec<(f64, f64)> = (0..n_tones)
            .map(|_| (rng.uniform(band.0, band.1), rng.uniform(0.0, std::f64::consts::TAU)))
            .collect();
        let mut samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                tones
                    .iter()
                    .map(|&(f, p)| (std::f64::consts::TAU * f * t + p).sin())
                    .sum::<f64>()
            })
            .collect();
        let peak = samples.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for s in &mut samples {
            *s = *s / peak * 0.9;
        }
        AudioClip::new(samples, sr).unwrap()
    }

    pub const CLASS_BANDS: [(f64, f64); 6] = [
        (100.0, 350.0),
        (500.0, 900.0),
        (1200.0, 1700.0),
        (2100.0, 2700.0),
        (3300.0, 4100.0),
        (5000.0, 6200.0),
    ];

    #[test]
    fn featurize_dimension_and_silence() {
        let (cfg, dsp) = default_sections();
        let clip = AudioClip::new(vec![0.0f64; 16_000], 16_000).unwrap();
        let f = featurize(&clip, &dsp, cfg.n_coeffs).unwrap();
        assert_eq!(f.len(), 80);
        // Mean vector equals the DCT of the floor vector; std is exactly zero.
        let floor_dct = crate::reference::naive_dct2(&vec![-80.0; 40]);
        for k in 0..40 {
            assert!((f[k] - floor_dct[k]).abs() < 1e-9);
            assert!(f[40 + k].abs() < 1e-9);
        }
    }

    #[test]
    fn featurize_matches_bruteforce_pooling_of_mfcc() {
        let (cfg, dsp) = default_sections();
        let clip = band_noise_clip(CLASS_BANDS[2], 7, 8000, 16_000);
        let f = featurize(&clip, &dsp, cfg.n_coeffs).unwrap();

        let params = StftParams::<f64>::default_16k();
        let spec = mel_spectrogram(&clip, 40, &params, -80.0).unwrap();
        let m = mfcc(&spec, 40).unwrap();
        for k in 0..40 {
            let row = m.data().row(k);
            let mean: f64 = row.iter().sum::<f64>() / row.len() as f64;
            let var: f64 =
                row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
            assert!((f[k] - mean).abs() < 1e-6);
            assert!((f[40 + k] - var.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn featurize_is_invariant_to_subhop_padding() {
        // Padding that does not change the frame count never touches any
        // analysis frame, so the features are identical.
        let (cfg, dsp) = default_sections();
        let len = 400 + 160 * 48; // frame grid boundary
        let clip = band_noise_clip(CLASS_BANDS[0], 3, len, 16_000);
        let f0 = featurize(&clip, &dsp, cfg.n_coeffs).unwrap();

        let mut padded = clip.samples().to_vec();
        padded.extend(std::iter::repeat_n(0.0, 159));
        let padded = AudioClip::new(padded, 16_000).unwrap();
        let f1 = featurize(&padded, &dsp, cfg.n_coeffs).unwrap();
        for (a, b) in f0.iter().zip(f1.iter()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn predictions_are_a_probability_simplex() {
        let (cfg, dsp) = default_sections();
        let model: ClassifierModel<f64> = ClassifierModel::new(&cfg, &dsp, 11);
        let clip = band_noise_clip(CLASS_BANDS[1], 5, 8000, 16_000);
        let (_, probs) = model.predict(&clip).unwrap();
        assert_eq!(probs.len(), 6);
        assert!(probs.iter().all(|&p| p >= 0.0));
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn forced_logits_pick_the_forced_class() {
        let (cfg, dsp) = default_sections();
        let model: ClassifierModel<f64> = ClassifierModel::new(&cfg, &dsp, 11);
        // Zero the head weights and set the bias so logits are (10,0,...,0).
        model
            .head
            .weight
            .set_values(vec![0.0; 256 * 6])
            .unwrap();
        model
            .head
            .bias
            .set_values(vec![10.0, 0.0, 0.0, 0.0, 0.0, 0.0])
            .unwrap();
        let features = vec![0.1; model.input_dim];
        let (label, probs) = model.predict_features(&features).unwrap();
        assert_eq!(label, EmotionLabel::Anger);
        assert!(probs[0] > 0.999);
    }

    #[test]
    fn prediction_is_deterministic() {
        let (cfg, dsp) = default_sections();
        let model: ClassifierModel<f64> = ClassifierModel::new(&cfg, &dsp, 11);
        let clip = band_noise_clip(CLASS_BANDS[4], 9, 8000, 16_000);
        let a = model.predict(&clip).unwrap();
        let b = model.predict(&clip).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn single_class_data_is_rejected() {
        let (cfg, dsp) = default_sections();
        let mut data = FeatureDataset::<f64>::default();
        data.push(vec![0.0; 80], EmotionLabel::Sad);
        data.push(vec![1.0; 80], EmotionLabel::Sad);
        assert!(matches!(
            train_classifier(&data, &cfg, &dsp, 1),
            Err(ClassifierError::SingleClass)
        ));
        let empty = FeatureDataset::<f64>::default();
        assert!(matches!(
            train_classifier(&empty, &cfg, &dsp, 1),
            Err(ClassifierError::EmptyDataset)
        ));
    }

    #[test]
    fn zero_epochs_returns_initialized_model() {
        let (mut cfg, dsp) = default_sections();
        cfg.epochs = 0;
        let mut data = FeatureDataset::<f64>::default();
        data.push(vec![0.0; 80], EmotionLabel::Sad);
        data.push(vec![1.0; 80], EmotionLabel::Happy);
        let (model, history) = train_classifier(&data, &cfg, &dsp, 1).unwrap();
        assert!(history.is_empty());
        let fresh: ClassifierModel<f64> = ClassifierModel::new(&cfg, &dsp, 1);
        assert_eq!(model.l1.weight.values(), fresh.l1.weight.values());
    }

    #[test]
    fn hand_computed_confusion_example() {
        // Two active classes: [[5,5],[0,10]] embedded in the 6x6 matrix.
        let mut confusion = [[0usize; 6]; 6];
        confusion[0][0] = 5;
        confusion[0][1] = 5;
        confusion[1][1] = 10;
        let report = EvalReport::from_confusion(confusion);
        assert!((report.accuracy - 0.75).abs() < 1e-12);
        // F1_0 = 2/3, F1_1 = 0.8, macro over the two active classes.
        assert!((report.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let mut confusion = [[0usize; 6]; 6];
        for k in 0..6 {
            confusion[k][k] = 7;
        }
        let report = EvalReport::from_confusion(confusion);
        assert_eq!(report.accuracy, 1.0);
        assert!((report.macro_f1 - 1.0).abs() < 1e-12);
        assert_eq!(report.row_sums(), [7; 6]);
    }

    #[test]
    fn label_permutation_preserves_accuracy_and_macro_f1() {
        let mut rng = SeededRng::new(13);
        let mut confusion = [[0usize; 6]; 6];
        for row in confusion.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.index(10);
            }
        }
        let base = EvalReport::from_confusion(confusion);

        let perm = [3usize, 5, 0, 1, 4, 2];
        let mut permuted = [[0usize; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                permuted[perm[i]][perm[j]] = confusion[i][j];
            }
        }
        let report = EvalReport::from_confusion(permuted);
        assert!((report.accuracy - base.accuracy).abs() < 1e-12);
        assert!((report.macro_f1 - base.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn uniform_random_predictor_scores_near_chance() {
        let mut rng = SeededRng::new(99);
        let mut confusion = [[0usize; 6]; 6];
        for _ in 0..600 {
            let true_class = rng.index(6);
            let pred = rng.index(6);
            confusion[true_class][pred] += 1;
        }
        let report = EvalReport::from_confusion(confusion);
        assert!((report.accuracy - 1.0 / 6.0).abs() < 0.05);
    }

    #[test]
    fn perfect_judge_scores_identity_generator_at_one() {
        // Train a judge to 100% on two separable bands, then feed it
        // unmodified sad-band clips labeled as target "sad".
        let (mut cfg, dsp) = default_sections();
        cfg.epochs = 120;
        cfg.learning_rate = 1e-3;
        let mut data = FeatureDataset::<f64>::default();
        let mut clips = Vec::new();
        for j in 0..12 {
            let happy = band_noise_clip(CLASS_BANDS[0], 300 + j, 8000, 16_000);
            data.push(featurize(&happy, &dsp, cfg.n_coeffs).unwrap(), EmotionLabel::Happy);
            let sad = band_noise_clip(CLASS_BANDS[5], 600 + j, 8000, 16_000);
            data.push(featurize(&sad, &dsp, cfg.n_coeffs).unwrap(), EmotionLabel::Sad);
            clips.push(sad);
        }
        let (model, history) = train_classifier(&data, &cfg, &dsp, 8).unwrap();
        assert_eq!(history.last().unwrap().accuracy, 1.0);

        let (fraction, report) = judge_transfer(&model, &clips, EmotionLabel::Sad).unwrap();
        assert_eq!(fraction, 1.0);
        assert_eq!(report.confusion[EmotionLabel::Sad.code()][EmotionLabel::Sad.code()], 12);

        // All clips predicted as a non-target class scores zero.
        let (fraction, _) = judge_transfer(&model, &clips, EmotionLabel::Fear).unwrap();
        assert_eq!(fraction, 0.0);

        assert!(matches!(
            judge_transfer(&model, &[], EmotionLabel::Sad),
            Err(ClassifierError::EmptyInput)
        ));
    }

    #[test]
    fn overfits_sixty_separable_synthetic_clips() {
        let (mut cfg, dsp) = default_sections();
        cfg.epochs = 200;
        cfg.learning_rate = 1e-3;
        let mut data = FeatureDataset::<f64>::default();
        for (class, &band) in CLASS_BANDS.iter().enumerate() {
            for j in 0..10 {
                let clip = band_noise_clip(band, (class * 100 + j) as u64, 8000, 16_000);
                data.push(
                    featurize(&clip, &dsp, cfg.n_coeffs).unwrap(),
                    EmotionLabel::from_code(class).unwrap(),
                );
            }
        }
        let (model, history) = train_classifier(&data, &cfg, &dsp, 5).unwrap();
        let reached = history.iter().any(|s| s.accuracy >= 0.95);
        assert!(
            reached,
            "final accuracy {}",
            history.last().map(|s| s.accuracy).unwrap_or(0.0)
        );
        let report = evaluate(&model, &data).unwrap();
        assert!(report.accuracy >= 0.95);
    }
}
