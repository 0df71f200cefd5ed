//! `emostyle`: emotional style transfer on speech audio.
//!
//! Exit codes: 0 success, 1 usage, 2 input/data, 3 numerical failure,
//! 4 artifact mismatch.

mod commands;
mod error;
mod pgm;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use emostyle_core::classifier::EmotionLabel;
use emostyle_core::config::RunConfig;

use crate::commands::Ctx;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "emostyle",
    version,
    about = "Emotional style transfer between speech clips via mel spectrograms"
)]
struct Cli {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing); overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan corpus roots and write a labeled manifest with train/test splits.
    Manifest {
        /// Dataset root directories; falls back to config roots, then
        /// $EMOSTYLE_DATA.
        #[arg(long, num_args = 1..)]
        roots: Vec<PathBuf>,
    },
    /// Extract per-frame features (amplitude envelope, zero-crossing rate,
    /// MFCCs) from one clip.
    Features {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train the six-way MFCC emotion classifier on the manifest train split.
    TrainClassifier {
        #[arg(long)]
        manifest: PathBuf,
        /// Dataset(s) to leave out of training (repeatable).
        #[arg(long = "exclude-dataset")]
        exclude_dataset: Vec<String>,
    },
    /// Train one source-to-target style transfer model.
    TrainMelgan {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        source: EmotionLabelArg,
        #[arg(long)]
        target: EmotionLabelArg,
    },
    /// Gram-matrix baseline: restyle a content clip toward a style clip.
    StyleTransfer {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        style: PathBuf,
    },
    /// Run a trained model on a clip; writes audio and before/after plots.
    Transfer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Judge a trained model over the manifest test split with a trained
    /// classifier; prints a `Model | Accuracy | F1` row.
    Evaluate {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        melgan: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Target emotion used as the judged label; defaults to the model's
        /// training target.
        #[arg(long)]
        target: Option<EmotionLabelArg>,
    },
    /// Render a clip's mel spectrogram as a PGM image.
    Spectrogram {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Clap-friendly wrapper so bad emotion names become usage errors.
#[derive(Clone)]
struct EmotionLabelArg(EmotionLabel);

impl std::str::FromStr for EmotionLabelArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(EmotionLabelArg)
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.run.out_dir));
    std::fs::create_dir_all(&out_dir)?;
    let ctx = Ctx { config, out_dir };

    match &cli.command {
        Command::Manifest { roots } => commands::cmd_manifest(&ctx, roots),
        Command::Features { input } => commands::cmd_features(&ctx, input),
        Command::TrainClassifier {
            manifest,
            exclude_dataset,
        } => commands::cmd_train_classifier(&ctx, manifest, exclude_dataset),
        Command::TrainMelgan {
            manifest,
            source,
            target,
        } => commands::cmd_train_melgan(&ctx, manifest, source.0, target.0),
        Command::StyleTransfer { content, style } => {
            commands::cmd_style_transfer(&ctx, content, style)
        }
        Command::Transfer {
            checkpoint,
            input,
            output,
        } => commands::cmd_transfer(&ctx, checkpoint, input, output.as_deref()),
        Command::Evaluate {
            classifier,
            melgan,
            manifest,
            target,
        } => commands::cmd_evaluate(
            &ctx,
            classifier,
            melgan,
            manifest,
            target.as_ref().map(|t| t.0),
        ),
        Command::Spectrogram { input, output } => {
            commands::cmd_spectrogram(&ctx, input, output.as_deref())
        }
    }
}
