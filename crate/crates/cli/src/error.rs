//! Exit-code contract: 0 success, 1 usage, 2 input/data, 3 numerical
//! failure, 4 artifact mismatch.

use emostyle_core::checkpoint::CheckpointError;
use emostyle_core::classifier::ClassifierError;
use emostyle_core::config::ConfigError;
use emostyle_core::corpus::CorpusError;
use emostyle_core::dsp::DspError;
use emostyle_core::melgan::MelganError;
use emostyle_core::neural_style::StyleError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
    Artifact(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Input(m)
            | CliError::Numerical(m)
            | CliError::Artifact(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MelganError> for CliError {
    fn from(e: MelganError) -> Self {
        match &e {
            MelganError::NanLoss { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match &e {
            ClassifierError::NanLoss { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<StyleError> for CliError {
    fn from(e: StyleError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match &e {
            CheckpointError::Io(io) => CliError::Input(io.to_string()),
            _ => CliError::Artifact(e.to_string()),
        }
    }
}
