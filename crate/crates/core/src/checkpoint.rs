//! Checkpoint container: a versioned header (model kind, config snapshot,
//! tensor directory, payload digest) followed by raw little-endian f32
//! blocks. Round trips are bit-exact; version mismatches are rejected, never
//! migrated.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{ClassifierModel, EmotionLabel};
use crate::config::{ClassifierSection, DspSection, MelganSection};
use crate::melgan::MelganModel;
use crate::scalar::{real, Real};

const MAGIC: &[u8; 4] = b"EMCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found} (this build reads {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint holds a '{found}' model, expected '{expected}'")]
    KindMismatch { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad config snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_kind: String,
    pub config_toml: String,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut payload: Vec<u8> = Vec::new();
        let mut directory: Vec<(String, Vec<usize>, u64)> = Vec::new();
        for t in &self.tensors {
            let len: usize = t.shape.iter().product();
            if len != t.data.len() {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor '{}': shape product {} vs {} values",
                    t.name,
                    len,
                    t.data.len()
                )));
            }
            directory.push((t.name.clone(), t.shape.clone(), payload.len() as u64));
            for v in &t.data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&payload);

        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        write_bytes(&mut out, self.model_kind.as_bytes());
        write_bytes(&mut out, self.config_toml.as_bytes());
        out.extend_from_slice(&(directory.len() as u32).to_le_bytes());
        for (name, shape, offset) in &directory {
            write_bytes(&mut out, name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
        }
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&digest);
        out.extend_from_slice(&payload);

        std::fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = std::fs::read(path)?;
        let mut r = Reader { bytes: &bytes, pos: 0 };

        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(CheckpointError::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let model_kind = r.string()?;
        let config_toml = r.string()?;
        let n_tensors = r.u32()? as usize;
        let mut directory = Vec::with_capacity(n_tensors);
        for _ in 0..n_tensors {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            if ndim > 8 {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor '{name}': implausible rank {ndim}"
                )));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let offset = r.u64()?;
            directory.push((name, shape, offset));
        }
        let payload_len = r.u64()? as usize;
        let digest = r.take(32)?.to_vec();
        let payload = r.take(payload_len).map_err(|_| {
            CheckpointError::Corrupt(format!(
                "payload truncated: header promises {payload_len} bytes, file has {}",
                bytes.len().saturating_sub(r.pos)
            ))
        })?;
        if !r.at_end() {
            return Err(CheckpointError::Corrupt("trailing bytes after payload".into()));
        }
        let actual = Sha256::digest(payload);
        if actual.as_slice() != digest.as_slice() {
            return Err(CheckpointError::Corrupt("payload digest mismatch".into()));
        }

        let mut tensors = Vec::with_capacity(n_tensors);
        for (name, shape, offset) in directory {
            let len: usize = shape.iter().product();
            let start = offset as usize;
            let end = start + 4 * len;
            if end > payload.len() {
                return Err(CheckpointError::Corrupt(format!(
                    "tensor '{name}': shape product {len} needs bytes {start}..{end}, payload has {}",
                    payload.len()
                )));
            }
            let data: Vec<f32> = payload[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(TensorRecord { name, shape, data });
        }
        Ok(Self {
            model_kind,
            config_toml,
            tensors,
        })
    }
}

fn write_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt("unexpected end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }

    fn string(&mut self) -> Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        if len > 1 << 20 {
            return Err(CheckpointError::Corrupt(format!(
                "implausible string length {len}"
            )));
        }
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CheckpointError::Corrupt("non-UTF-8 string".into()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

// --- model adapters -------------------------------------------------------

/// Everything needed to rebuild a melgan model shell before loading weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MelganSnapshot {
    pub source: String,
    pub target: String,
    pub seed: u64,
    pub melgan: MelganSection,
    pub dsp: DspSection,
}

pub const KIND_MELGAN: &str = "melgan";
pub const KIND_CLASSIFIER: &str = "classifier";

fn records_from_state<F: Real>(state: Vec<(String, Vec<usize>, Vec<F>)>) -> Vec<TensorRecord> {
    state
        .into_iter()
        .map(|(name, shape, data)| TensorRecord {
            name,
            shape,
            data: data
                .into_iter()
                .map(|v| v.to_f32().expect("finite parameter"))
                .collect(),
        })
        .collect()
}

fn state_from_records<F: Real>(records: &[TensorRecord]) -> Vec<(String, Vec<usize>, Vec<F>)> {
    records
        .iter()
        .map(|r| {
            (
                r.name.clone(),
                r.shape.clone(),
                r.data.iter().map(|&v| real::<F>(v as f64)).collect(),
            )
        })
        .collect()
}

pub fn save_melgan<F: Real>(model: &MelganModel<F>, path: &Path) -> Result<(), CheckpointError> {
    let snapshot = MelganSnapshot {
        source: model.pair.0.to_string(),
        target: model.pair.1.to_string(),
        seed: model.seed,
        melgan: model.melgan.clone(),
        dsp: model.dsp.clone(),
    };
    let config_toml =
        toml::to_string_pretty(&snapshot).map_err(|e| CheckpointError::Snapshot(e.to_string()))?;
    Checkpoint {
        model_kind: KIND_MELGAN.to_string(),
        config_toml,
        tensors: records_from_state(model.state_dict()),
    }
    .save(path)
}

pub fn load_melgan<F: Real>(path: &Path) -> Result<MelganModel<F>, CheckpointError> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.model_kind != KIND_MELGAN {
        return Err(CheckpointError::KindMismatch {
            found: ckpt.model_kind,
            expected: KIND_MELGAN.to_string(),
        });
    }
    let snapshot: MelganSnapshot = toml::from_str(&ckpt.config_toml)
        .map_err(|e| CheckpointError::Snapshot(e.to_string()))?;
    let pair = (
        snapshot
            .source
            .parse::<EmotionLabel>()
            .map_err(CheckpointError::Snapshot)?,
        snapshot
            .target
            .parse::<EmotionLabel>()
            .map_err(CheckpointError::Snapshot)?,
    );
    let mut model = MelganModel::new(&snapshot.melgan, &snapshot.dsp, pair, snapshot.seed)
        .map_err(|e| CheckpointError::Snapshot(e.to_string()))?;
    model
        .load_state_dict(&state_from_records(&ckpt.tensors))
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(model)
}

/// Classifier shell parameters plus its feature settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierSnapshot {
    pub seed: u64,
    pub classifier: ClassifierSection,
    pub dsp: DspSection,
}

pub fn save_classifier<F: Real>(
    model: &ClassifierModel<F>,
    path: &Path,
) -> Result<(), CheckpointError> {
    let snapshot = ClassifierSnapshot {
        seed: model.seed,
        classifier: model.cfg.clone(),
        dsp: model.dsp.clone(),
    };
    let config_toml =
        toml::to_string_pretty(&snapshot).map_err(|e| CheckpointError::Snapshot(e.to_string()))?;
    Checkpoint {
        model_kind: KIND_CLASSIFIER.to_string(),
        config_toml,
        tensors: records_from_state(model.state_dict()),
    }
    .save(path)
}

pub fn load_classifier<F: Real>(path: &Path) -> Result<ClassifierModel<F>, CheckpointError> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.model_kind != KIND_CLASSIFIER {
        return Err(CheckpointError::KindMismatch {
            found: ckpt.model_kind,
            expected: KIND_CLASSIFIER.to_string(),
        });
    }
    let snapshot: ClassifierSnapshot = toml::from_str(&ckpt.config_toml)
        .map_err(|e| CheckpointError::Snapshot(e.to_string()))?;
    let mut model = ClassifierModel::new(&snapshot.classifier, &snapshot.dsp, snapshot.seed);
    model
        .load_state_dict(&state_from_records(&ckpt.tensors))
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::EmotionLabel;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("emostyle-ckpt-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_checkpoint() -> Checkpoint {
        Checkpoint {
            model_kind: "melgan".into(),
            config_toml: "seed = 7\n".into(),
            tensors: vec![
                TensorRecord {
                    name: "a.weight".into(),
                    shape: vec![2, 3],
                    data: vec![1.0, -2.5, 3.25, 0.0, 1e-7, -1e7],
                },
                TensorRecord {
                    name: "a.bias".into(),
                    shape: vec![3],
                    data: vec![0.5, -0.5, 0.0],
                },
            ],
        }
    }

    #[test]
    fn container_round_trip_is_bit_exact() {
        let path = temp_path("roundtrip.ckpt");
        let ckpt = sample_checkpoint();
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model_kind, ckpt.model_kind);
        assert_eq!(loaded.config_toml, ckpt.config_toml);
        assert_eq!(loaded.tensors.len(), 2);
        for (a, b) in loaded.tensors.iter().zip(ckpt.tensors.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            for (x, y) in a.data.iter().zip(b.data.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let path = temp_path("truncated.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        match Checkpoint::load(&path) {
            Err(CheckpointError::Corrupt(msg)) => {
                assert!(msg.contains("truncated") || msg.contains("end of file"), "{msg}");
            }
            other => panic!("expected Corrupt, got {other:?}"),
        }
    }

    #[test]
    fn flipped_payload_bit_fails_the_digest() {
        let path = temp_path("bitflip.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        match Checkpoint::load(&path) {
            Err(CheckpointError::Corrupt(msg)) => assert!(msg.contains("digest"), "{msg}"),
            other => panic!("expected Corrupt, got {other:?}"),
        }
    }

    #[test]
    fn shape_payload_disagreement_reports_both_numbers() {
        let path = temp_path("shapebad.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // The first tensor's first dim (u64 little-endian) sits right after
        // its name; bump 2 -> 200 so the directory outruns the payload.
        let name_pos = bytes
            .windows(8)
            .position(|w| w == b"a.weight")
            .unwrap();
        let dim_pos = name_pos + 8 + 4; // name, ndim
        assert_eq!(bytes[dim_pos], 2);
        bytes[dim_pos] = 200;
        std::fs::write(&path, &bytes).unwrap();
        match Checkpoint::load(&path) {
            Err(CheckpointError::Corrupt(msg)) => {
                assert!(msg.contains("600"), "{msg}"); // 200*3 shape product
                assert!(msg.contains("36"), "{msg}"); // 9 floats = 36 bytes
            }
            other => panic!("expected Corrupt, got {other:?}"),
        }
    }

    #[test]
    fn future_version_is_rejected() {
        let path = temp_path("version.ckpt");
        sample_checkpoint().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(CheckpointError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn melgan_model_round_trip_generates_identically() {
        use crate::config::{DspSection, MelganSection};
        use crate::mat::Mat;
        use crate::melgan::{MelganModel, SpectrogramSegment};

        let melgan = MelganSection {
            depth: 2,
            base_channels: 4,
            seg_frames: 32,
            embedding_dim: 16,
            ..MelganSection::default()
        };
        let dsp = DspSection {
            n_mels: 16,
            ..DspSection::default()
        };
        let model: MelganModel<f32> =
            MelganModel::new(&melgan, &dsp, (EmotionLabel::Happy, EmotionLabel::Sad), 21)
                .unwrap();
        let path = temp_path("melgan.ckpt");
        save_melgan(&model, &path).unwrap();
        let loaded: MelganModel<f32> = load_melgan(&path).unwrap();
        assert_eq!(loaded.pair, model.pair);

        let mut rng = crate::rng::SeededRng::new(2);
        let mut seg = Mat::zeros(16, 32);
        for v in seg.data_mut() {
            *v = rng.uniform(-1.0f32, 1.0);
        }
        let seg = SpectrogramSegment::from_mat(seg);
        let a = model.generate(&seg).unwrap();
        let b = loaded.generate(&seg).unwrap();
        for (x, y) in a.data().data().iter().zip(b.data().data().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn classifier_round_trip_predicts_identically() {
        use crate::classifier::ClassifierModel;
        use crate::config::{ClassifierSection, DspSection};

        let model: ClassifierModel<f32> =
            ClassifierModel::new(&ClassifierSection::default(), &DspSection::default(), 5);
        let path = temp_path("classifier.ckpt");
        save_classifier(&model, &path).unwrap();
        let loaded: ClassifierModel<f32> = load_classifier(&path).unwrap();

        let features = vec![0.3f32; model.input_dim];
        let (la, pa) = model.predict_features(&features).unwrap();
        let (lb, pb) = loaded.predict_features(&features).unwrap();
        assert_eq!(la, lb);
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn kind_mismatch_is_detected() {
        use crate::classifier::ClassifierModel;
        use crate::config::{ClassifierSection, DspSection};
        let model: ClassifierModel<f32> =
            ClassifierModel::new(&ClassifierSection::default(), &DspSection::default(), 5);
        let path = temp_path("kind.ckpt");
        save_classifier(&model, &path).unwrap();
        assert!(matches!(
            load_melgan::<f32>(&path),
            Err(CheckpointError::KindMismatch { .. })
        ));
    }
}
