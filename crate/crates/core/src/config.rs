//! Run configuration: a nested TOML document with strict keys. Unknown keys
//! are rejected; every field has a documented default, and the effective
//! config can be dumped back to disk and reloaded into an equivalent run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{DspError, StftParams};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Master seed; every stochastic choice derives from it.
    pub seed: u64,
    /// Directory for all command outputs.
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspSection {
    pub sample_rate: u32,
    /// 25 ms at 16 kHz.
    pub window_len: usize,
    /// 10 ms at 16 kHz.
    pub hop_len: usize,
    pub fft_len: usize,
    pub n_mels: usize,
    /// dB floor relative to each clip's maximum.
    pub floor_db: f64,
    pub griffin_lim_iterations: usize,
}

impl Default for DspSection {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_len: 400,
            hop_len: 160,
            fft_len: 512,
            n_mels: 40,
            floor_db: -80.0,
            griffin_lim_iterations: 32,
        }
    }
}

impl DspSection {
    pub fn stft_params<F: Real>(&self) -> Result<StftParams<F>, DspError> {
        StftParams::new(self.window_len, self.hop_len, self.fft_len)
    }

    pub fn floor<F: Real>(&self) -> F {
        real::<F>(self.floor_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    /// Dataset roots; when empty the CLI falls back to `EMOSTYLE_DATA`.
    pub roots: Vec<String>,
    /// Held-out clips per emotion class.
    pub test_per_class: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            roots: Vec::new(),
            test_per_class: 177,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MelganSection {
    /// Frames per spectrogram segment fed to the networks.
    pub seg_frames: usize,
    /// U-net encoder/decoder levels; 0 collapses the generator to its
    /// 1x1 output head (useful for identity checks).
    pub depth: usize,
    pub base_channels: usize,
    pub embedding_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Generator (+ siamese) updates per discriminator update.
    pub gen_updates_per_disc: usize,
    pub travel_weight: f64,
    pub margin_weight: f64,
    pub margin: f64,
    /// Hard cap on optimizer steps; 0 means no cap.
    pub max_steps: usize,
    /// `tanh` or `linear` output head.
    pub output_activation: String,
}

impl Default for MelganSection {
    fn default() -> Self {
        Self {
            seg_frames: 128,
            depth: 2,
            base_channels: 16,
            embedding_dim: 128,
            epochs: 20,
            batch_size: 16,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            gen_updates_per_disc: 3,
            travel_weight: 10.0,
            margin_weight: 10.0,
            margin: 1.0,
            max_steps: 0,
            output_activation: "tanh".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    /// MFCC coefficients kept; the feature vector is twice this (mean & std).
    pub n_coeffs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self {
            n_coeffs: 40,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StyleSection {
    pub n_filters: usize,
    /// Kernel width in frames; kernel height always spans all mel bands.
    pub kernel_width: usize,
    pub content_weight: f64,
    pub style_weight: f64,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for StyleSection {
    fn default() -> Self {
        Self {
            n_filters: 64,
            kernel_width: 11,
            content_weight: 1.0,
            style_weight: 1e-2,
            steps: 500,
            learning_rate: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub dsp: DspSection,
    pub corpus: CorpusSection,
    pub melgan: MelganSection,
    pub classifier: ClassifierSection,
    pub style: StyleSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dsp
            .stft_params::<f32>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.dsp.n_mels == 0 {
            return Err(ConfigError::Invalid("n_mels must be positive".into()));
        }
        if self.dsp.floor_db >= 0.0 {
            return Err(ConfigError::Invalid("floor_db must be negative".into()));
        }
        if self.dsp.griffin_lim_iterations == 0 {
            return Err(ConfigError::Invalid(
                "griffin_lim_iterations must be at least 1".into(),
            ));
        }
        if self.classifier.n_coeffs == 0 || self.classifier.n_coeffs > self.dsp.n_mels {
            return Err(ConfigError::Invalid(format!(
                "n_coeffs must be in 1..={}",
                self.dsp.n_mels
            )));
        }
        let div = 1usize << self.melgan.depth;
        if !self.dsp.n_mels.is_multiple_of(div) || !self.melgan.seg_frames.is_multiple_of(div) {
            return Err(ConfigError::Invalid(format!(
                "n_mels ({}) and seg_frames ({}) must be divisible by 2^depth ({div})",
                self.dsp.n_mels, self.melgan.seg_frames
            )));
        }
        if self.melgan.batch_size < 2 {
            return Err(ConfigError::Invalid("melgan batch_size must be >= 2".into()));
        }
        if self.melgan.gen_updates_per_disc == 0 {
            return Err(ConfigError::Invalid(
                "gen_updates_per_disc must be at least 1".into(),
            ));
        }
        match self.melgan.output_activation.as_str() {
            "tanh" | "linear" => {}
            other => {
                return Err(ConfigError::Invalid(format!(
                    "output_activation must be 'tanh' or 'linear', got '{other}'"
                )))
            }
        }
        if self.style.n_filters == 0 || self.style.steps == 0 || self.style.kernel_width == 0 {
            return Err(ConfigError::Invalid(
                "style n_filters, kernel_width and steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let reloaded = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[dsp]\nsample_rate = 16000\nbogus_key = 3\n";
        assert!(matches!(
            RunConfig::from_toml(text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn partial_configs_fill_in_defaults() {
        let cfg = RunConfig::from_toml("[melgan]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.melgan.epochs, 3);
        assert_eq!(cfg.melgan.batch_size, 16);
        assert_eq!(cfg.dsp.sample_rate, 16_000);
    }

    #[test]
    fn depth_divisibility_is_enforced() {
        let text = "[melgan]\ndepth = 4\n"; // 40 mels not divisible by 16
        assert!(matches!(
            RunConfig::from_toml(text),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn bad_activation_is_rejected() {
        let text = "[melgan]\noutput_activation = \"gelu\"\n";
        assert!(matches!(
            RunConfig::from_toml(text),
            Err(ConfigError::Invalid(_))
        ));
    }
}
