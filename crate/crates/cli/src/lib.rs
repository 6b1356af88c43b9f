//! The `impulse` command-line tool.
//!
//! Exit codes: 0 on success, 2 on usage errors, 3 on bad input data.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};

pub use manifest::{manifest_path, RunManifest, TOOL_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "impulse", version, about = "Detect impulsive sounds and evaluate features for them")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a 16 kHz mono WAV file for impulsive windows.
    Detect(DetectArgs),
    /// Add an impulse into a noise recording.
    Embed(EmbedArgs),
    /// Write a synthetic impulse, tone burst or noise recording.
    Synth(SynthArgs),
    /// Turn detection events into feature rows.
    Features(FeaturesArgs),
    /// Cross-validate a classifier on a feature CSV.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long = "mean-th")]
    pub mean_th: Option<f64>,
    #[arg(long = "var-th")]
    pub var_th: Option<f64>,
    /// Normalize by the peak of the whole file instead of per block.
    #[arg(long)]
    pub whole_file_norm: bool,
    /// Write events as JSON lines.
    #[arg(long, value_name = "OUT.jsonl")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("placement").required(true).args(["offset", "random"])))]
pub struct EmbedArgs {
    #[arg(long)]
    pub impulse: PathBuf,
    #[arg(long)]
    pub noise: PathBuf,
    /// Sample index in the noise where the impulse starts.
    #[arg(long)]
    pub offset: Option<usize>,
    /// Pick the offset at random from --seed.
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "target_snr")]
    pub gain: Option<f64>,
    /// Solve the gain so the mixture has this SNR in dB.
    #[arg(long, allow_negative_numbers = true)]
    pub target_snr: Option<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub what: SynthKind,
}

#[derive(Debug, Subcommand)]
pub enum SynthKind {
    /// Damped broadband burst.
    Impulse {
        #[arg(long, default_value_t = 0.006)]
        duration_s: f64,
        #[arg(long, default_value_t = 0.002)]
        decay_s: f64,
        #[arg(long, default_value_t = impulse_core::corpus::DEFAULT_HF_EMPHASIS)]
        hf_emphasis: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Damped sine burst.
    Tonal {
        #[arg(long, default_value_t = 6_000.0)]
        freq_hz: f64,
        #[arg(long, default_value_t = 0.006)]
        duration_s: f64,
        #[arg(long, default_value_t = 0.002)]
        decay_s: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Background noise: white, lowpass or babble_like.
    Noise {
        #[arg(long, default_value = "white")]
        kind: String,
        #[arg(long, default_value_t = 1.0)]
        duration_s: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub events: PathBuf,
    /// hf or mfcc.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub label: String,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Add rows to an existing CSV instead of replacing it.
    #[arg(long)]
    pub append: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// svm or knn.
    #[arg(long, default_value = "svm")]
    pub algo: String,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report path; defaults to `<data>.report.json`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}
