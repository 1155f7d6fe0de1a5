//! `aktv`: batch entry points for the Talk Test pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod features_csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aktivtalk_core::classifier::Task;
use aktivtalk_core::corpus::LabelSource;

#[derive(Debug, Parser)]
#[command(
    name = "aktv",
    version,
    about = "Talk Test audio features, exertion classifier and session tools"
)]
pub struct Cli {
    /// Print machine-readable JSON instead of the human summary.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pooled MFCC features for every clip in a manifest.
    Extract(ExtractArgs),
    /// Train one model on a whole corpus.
    Train(TrainArgs),
    /// Participant-grouped cross-validation.
    Cv(CvArgs),
    /// Classify one WAV with a trained model.
    Infer(InferArgs),
    /// Write a synthetic corpus: WAVs, manifest, heart-rate and ages files.
    Synth(SynthArgs),
    /// Export a log-mel spectrogram as CSV and PGM.
    Spectrogram(SpectrogramArgs),
    /// Replay a scripted session through the engine.
    Simulate(SimulateArgs),
    /// Run the local HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct FeatureOpts {
    /// Feature config as `key=value` lines; missing keys keep defaults.
    #[arg(long, value_name = "FILE")]
    pub feature_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub features: FeatureOpts,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus manifest CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Precomputed features from `extract`; used instead of decoding audio.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// `binary` (non_high vs high) or `three` (light, moderate, high).
    #[arg(long, default_value = "three")]
    pub task: Task,
    /// Ground truth: `self` (manifest ratings) or `pulse` (heart rate).
    #[arg(long, default_value = "self")]
    pub labels: LabelSource,
    /// Heart-rate CSV; required with `--labels pulse`.
    #[arg(long)]
    pub hr: Option<PathBuf>,
    /// Participant ages CSV; required with `--labels pulse`.
    #[arg(long)]
    pub ages: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the number of training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub feature_opts: FeatureOpts,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Write the CvReport JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    /// Id reported in the result; defaults to the model file stem.
    #[arg(long)]
    pub model_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub participants: usize,
    /// Clips per participant.
    #[arg(long, default_value_t = 30)]
    pub clips: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 15.0)]
    pub clip_seconds: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Output base path; `.csv` and `.pgm` are appended.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub features: FeatureOpts,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// SessionConfig JSON; defaults to a YNNS session with default timings.
    #[arg(long)]
    pub session_config: Option<PathBuf>,
    /// JSON array of timed events (`{"at_ms":..,"type":..}`).
    #[arg(long, conflicts_with = "nominal")]
    pub script: Option<PathBuf>,
    /// Use the generated nominal script.
    #[arg(long)]
    pub nominal: bool,
    /// Write the script that was run to this file.
    #[arg(long)]
    pub save_script: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub start_ms: i64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = aktivtalk_service::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Storage root.
    #[arg(long, env = "AKTV_DATA_DIR", default_value = aktivtalk_service::DEFAULT_DATA_DIR)]
    pub data_dir: PathBuf,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
