//! Corpus ingestion: filename-grammar parsers for the four emotion corpora,
//! manifest construction with deterministic splits, and WAV loading at the
//! canonical 16 kHz mono format.

mod resample;
pub mod wav;

pub use resample::resample;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::classifier::{EmotionLabel, N_CLASSES};
use crate::dsp::{AudioClip, DspError};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no labeled audio files found under: {0}")]
    NoFilesFound(String),
    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("bad manifest line {line}: {reason}")]
    BadManifestLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DatasetKind {
    CremaD,
    Ravdess,
    Savee,
    Tess,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::CremaD,
        DatasetKind::Ravdess,
        DatasetKind::Savee,
        DatasetKind::Tess,
    ];
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::CremaD => "cremad",
            DatasetKind::Ravdess => "ravdess",
            DatasetKind::Savee => "savee",
            DatasetKind::Tess => "tess",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cremad" | "crema-d" => Ok(DatasetKind::CremaD),
            "ravdess" => Ok(DatasetKind::Ravdess),
            "savee" => Ok(DatasetKind::Savee),
            "tess" => Ok(DatasetKind::Tess),
            other => Err(format!("unknown dataset '{other}'")),
        }
    }
}

/// Outcome of parsing one base filename.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseOutcome {
    Parsed {
        speaker_id: String,
        emotion: EmotionLabel,
        utterance_code: String,
    },
    /// Recognized but outside the six-emotion taxonomy (surprise codes).
    Excluded { code: String },
    Unparseable,
}

fn strip_wav(name: &str) -> &str {
    let lower = name.to_ascii_lowercase();
    if lower.ends_with(".wav") {
        &name[..name.len() - 4]
    } else {
        name
    }
}

/// Parses `name` against the grammar of `dataset`. Total: every string maps
/// to exactly one of the three outcomes.
pub fn parse_filename(dataset: DatasetKind, name: &str) -> ParseOutcome {
    let stem = strip_wav(name);
    match dataset {
        DatasetKind::CremaD => parse_cremad(stem),
        DatasetKind::Ravdess => parse_ravdess(stem),
        DatasetKind::Savee => parse_savee(stem),
        DatasetKind::Tess => parse_tess(stem),
    }
}

/// CREMA-D: `<actor>_<sentence>_<EMO>_<level>`; the intensity level field is
/// ignored.
fn parse_cremad(stem: &str) -> ParseOutcome {
    let parts: Vec<&str> = stem.split('_').collect();
    if parts.len() != 4 || parts.iter().any(|p| p.is_empty()) {
        return ParseOutcome::Unparseable;
    }
    let emotion = match parts[2].to_ascii_uppercase().as_str() {
        "ANG" => EmotionLabel::Anger,
        "DIS" => EmotionLabel::Disgust,
        "FEA" => EmotionLabel::Fear,
        "HAP" => EmotionLabel::Happy,
        "NEU" => EmotionLabel::Neutral,
        "SAD" => EmotionLabel::Sad,
        _ => return ParseOutcome::Unparseable,
    };
    ParseOutcome::Parsed {
        speaker_id: parts[0].to_string(),
        emotion,
        utterance_code: parts[1].to_string(),
    }
}

/// RAVDESS: seven dash-separated two-digit fields; field 3 is the emotion
/// (02 "calm" maps to neutral, 08 "surprised" is excluded), field 5 the
/// statement, field 7 the actor.
fn parse_ravdess(stem: &str) -> ParseOutcome {
    let parts: Vec<&str> = stem.split('-').collect();
    if parts.len() != 7 || parts.iter().any(|p| p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit())) {
        return ParseOutcome::Unparseable;
    }
    let emotion = match parts[2] {
        "01" | "02" => EmotionLabel::Neutral,
        "03" => EmotionLabel::Happy,
        "04" => EmotionLabel::Sad,
        "05" => EmotionLabel::Anger,
        "06" => EmotionLabel::Fear,
        "07" => EmotionLabel::Disgust,
        "08" => {
            return ParseOutcome::Excluded {
                code: "08".to_string(),
            }
        }
        _ => return ParseOutcome::Unparseable,
    };
    ParseOutcome::Parsed {
        speaker_id: parts[6].to_string(),
        emotion,
        utterance_code: parts[4].to_string(),
    }
}

/// SAVEE: `<speaker>_<code><nn>` with code in {a, d, f, h, n, sa, su};
/// `su` (surprise) is excluded.
fn parse_savee(stem: &str) -> ParseOutcome {
    let parts: Vec<&str> = stem.split('_').collect();
    if parts.len() != 2 || parts[0].is_empty() {
        return ParseOutcome::Unparseable;
    }
    let tail = parts[1];
    let code_len = tail.chars().take_while(|c| c.is_ascii_alphabetic()).count();
    let (code, digits) = tail.split_at(code_len);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return ParseOutcome::Unparseable;
    }
    let emotion = match code.to_ascii_lowercase().as_str() {
        "a" => EmotionLabel::Anger,
        "d" => EmotionLabel::Disgust,
        "f" => EmotionLabel::Fear,
        "h" => EmotionLabel::Happy,
        "n" => EmotionLabel::Neutral,
        "sa" => EmotionLabel::Sad,
        "su" => {
            return ParseOutcome::Excluded {
                code: "su".to_string(),
            }
        }
        _ => return ParseOutcome::Unparseable,
    };
    ParseOutcome::Parsed {
        speaker_id: parts[0].to_string(),
        emotion,
        utterance_code: tail.to_string(),
    }
}

/// TESS: `<speaker>_<word>_<emotion>` with a textual emotion; `ps`
/// (pleasant surprise) is excluded.
fn parse_tess(stem: &str) -> ParseOutcome {
    let parts: Vec<&str> = stem.split('_').collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
        return ParseOutcome::Unparseable;
    }
    let emotion = match parts[2].to_ascii_lowercase().as_str() {
        "angry" => EmotionLabel::Anger,
        "disgust" => EmotionLabel::Disgust,
        "fear" => EmotionLabel::Fear,
        "happy" => EmotionLabel::Happy,
        "neutral" => EmotionLabel::Neutral,
        "sad" => EmotionLabel::Sad,
        "ps" => {
            return ParseOutcome::Excluded {
                code: "ps".to_string(),
            }
        }
        _ => return ParseOutcome::Unparseable,
    };
    ParseOutcome::Parsed {
        speaker_id: parts[0].to_string(),
        emotion,
        utterance_code: parts[1].to_string(),
    }
}

/// Picks the dataset for a file: an ancestor directory named after a dataset
/// wins; otherwise the four grammars are tried, and a unique structural
/// match decides.
pub fn detect_dataset(path: &Path) -> Option<DatasetKind> {
    for comp in path.components() {
        let c = comp.as_os_str().to_string_lossy().to_ascii_lowercase();
        if c.contains("crema") {
            return Some(DatasetKind::CremaD);
        }
        if c.contains("ravdess") {
            return Some(DatasetKind::Ravdess);
        }
        if c.contains("savee") {
            return Some(DatasetKind::Savee);
        }
        if c.contains("tess") {
            return Some(DatasetKind::Tess);
        }
    }
    let name = path.file_name()?.to_string_lossy();
    let matches: Vec<DatasetKind> = DatasetKind::ALL
        .into_iter()
        .filter(|&k| parse_filename(k, &name) != ParseOutcome::Unparseable)
        .collect();
    match matches.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub dataset: DatasetKind,
    pub speaker_id: String,
    pub emotion: EmotionLabel,
    pub utterance_code: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter_split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Serializes as sorted tab-separated records:
    /// `path  dataset  speaker  emotion  utterance  split`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.path.display(),
                e.dataset,
                e.speaker_id,
                e.emotion,
                e.utterance_code,
                e.split
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 6 {
                return Err(CorpusError::BadManifestLine {
                    line: i + 1,
                    reason: format!("expected 6 fields, got {}", fields.len()),
                });
            }
            let bad = |reason: String| CorpusError::BadManifestLine { line: i + 1, reason };
            entries.push(ManifestEntry {
                path: PathBuf::from(fields[0]),
                dataset: fields[1].parse().map_err(bad)?,
                speaker_id: fields[2].to_string(),
                emotion: fields[3]
                    .parse()
                    .map_err(|e: String| CorpusError::BadManifestLine {
                        line: i + 1,
                        reason: e,
                    })?,
                utterance_code: fields[4].to_string(),
                split: fields[5]
                    .parse()
                    .map_err(|e: String| CorpusError::BadManifestLine {
                        line: i + 1,
                        reason: e,
                    })?,
            });
        }
        Ok(Self { entries })
    }
}

/// What a directory scan saw, including per-dataset and per-class tallies
/// and the names that failed to parse (surfaced as warnings).
#[derive(Debug, Clone, Default)]
pub struct ScanSummary {
    pub files_seen: usize,
    pub parsed: usize,
    pub excluded: usize,
    pub unparseable: Vec<PathBuf>,
    pub per_dataset: BTreeMap<DatasetKind, usize>,
    pub per_dataset_excluded: BTreeMap<DatasetKind, usize>,
    pub per_class: [usize; N_CLASSES],
}

/// Recursively scans `roots` for `.wav` files, parses each against its
/// dataset grammar, and returns entries ordered by path (all initially in
/// the train split) plus the scan summary.
pub fn build_manifest(roots: &[PathBuf]) -> Result<(Manifest, ScanSummary), CorpusError> {
    let mut summary = ScanSummary::default();
    let mut entries = Vec::new();

    for root in roots {
        for item in walkdir::WalkDir::new(root).sort_by_file_name() {
            let item = match item {
                Ok(i) => i,
                Err(_) => continue,
            };
            if !item.file_type().is_file() {
                continue;
            }
            let path = item.path();
            let is_wav = path
                .extension()
                .map(|e| e.eq_ignore_ascii_case("wav"))
                .unwrap_or(false);
            if !is_wav {
                continue;
            }
            summary.files_seen += 1;
            let name = path.file_name().unwrap_or_default().to_string_lossy();
            let Some(dataset) = detect_dataset(path) else {
                summary.unparseable.push(path.to_path_buf());
                continue;
            };
            match parse_filename(dataset, &name) {
                ParseOutcome::Parsed {
                    speaker_id,
                    emotion,
                    utterance_code,
                } => {
                    summary.parsed += 1;
                    *summary.per_dataset.entry(dataset).or_insert(0) += 1;
                    summary.per_class[emotion.code()] += 1;
                    entries.push(ManifestEntry {
                        path: path.to_path_buf(),
                        dataset,
                        speaker_id,
                        emotion,
                        utterance_code,
                        split: Split::Train,
                    });
                }
                ParseOutcome::Excluded { .. } => {
                    summary.excluded += 1;
                    *summary.per_dataset_excluded.entry(dataset).or_insert(0) += 1;
                }
                ParseOutcome::Unparseable => summary.unparseable.push(path.to_path_buf()),
            }
        }
    }

    if entries.is_empty() {
        let listing = roots
            .iter()
            .map(|r| r.display().to_string())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(CorpusError::NoFilesFound(listing));
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok((Manifest { entries }, summary))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Default)]
pub struct SplitSummary {
    pub test_per_class: [usize; N_CLASSES],
    pub warnings: Vec<String>,
}

/// Assigns train/test per class: entries are ranked by a seeded hash of
/// their path (stable under scan order), and the first `test_per_class` go
/// to test. A class that cannot afford the request falls back to the
/// fraction the request represents of the largest class, never more than
/// half the class.
pub fn split(manifest: &mut Manifest, test_per_class: usize, seed: u64) -> SplitSummary {
    let mut summary = SplitSummary::default();
    for e in &mut manifest.entries {
        e.split = Split::Train;
    }
    if test_per_class == 0 {
        return summary;
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    for (i, e) in manifest.entries.iter().enumerate() {
        by_class[e.emotion.code()].push(i);
    }
    let largest = by_class.iter().map(Vec::len).max().unwrap_or(0);

    for (class, indices) in by_class.iter().enumerate() {
        let count = indices.len();
        if count == 0 {
            continue;
        }
        let n_test = if count > test_per_class {
            test_per_class
        } else {
            let ratio = (test_per_class as f64 / largest.max(1) as f64).min(0.5);
            let fallback = if count < 2 {
                0
            } else {
                ((count as f64 * ratio).round() as usize).clamp(1, count / 2)
            };
            summary.warnings.push(format!(
                "class {} has only {count} entries; falling back to {fallback} test clips",
                EmotionLabel::from_code(class).expect("class code")
            ));
            fallback
        };

        let mut ranked: Vec<(u64, usize)> = indices
            .iter()
            .map(|&i| {
                let path_bytes = manifest.entries[i].path.to_string_lossy();
                (splitmix64(seed ^ fnv1a64(path_bytes.as_bytes())), i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| {
            manifest.entries[a.1].path.cmp(&manifest.entries[b.1].path)
        }));
        for &(_, i) in ranked.iter().take(n_test) {
            manifest.entries[i].split = Split::Test;
        }
        summary.test_per_class[class] = n_test;
    }
    summary
}

/// Per-class and per-dataset entry counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub per_class: [usize; N_CLASSES],
    pub per_dataset: BTreeMap<DatasetKind, usize>,
    pub total: usize,
}

pub fn class_counts(manifest: &Manifest) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for e in &manifest.entries {
        counts.per_class[e.emotion.code()] += 1;
        *counts.per_dataset.entry(e.dataset).or_insert(0) += 1;
        counts.total += 1;
    }
    counts
}

/// Decodes a WAV file, averages to mono, resamples to `target_rate`, and
/// peak-normalizes to 0.95.
pub fn load_audio<F: Real>(path: &Path, target_rate: u32) -> Result<AudioClip<F>, CorpusError> {
    let wav = wav::read_wav::<F>(path)?;
    let mono: Vec<F> = if wav.channels == 1 {
        wav.samples
    } else {
        let half = real::<F>(0.5);
        wav.samples
            .chunks_exact(2)
            .map(|c| (c[0] + c[1]) * half)
            .collect()
    };
    if mono.is_empty() {
        return Err(CorpusError::CorruptFile(format!(
            "{}: empty data chunk",
            path.display()
        )));
    }
    let resampled = resample(&mono, wav.sample_rate, target_rate);
    let mut clip = AudioClip::new(resampled, target_rate)?;
    clip.peak_normalize(real::<F>(0.95));
    Ok(clip)
}
