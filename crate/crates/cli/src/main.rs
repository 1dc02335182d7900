//! `canopy`: synthetic scenes, preprocessing, training, detection, evaluation
//! and maps for recurrent-autoencoder forest anomaly detection.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use canopy_core::evaluation::{MapLayer, VegetationIndex};

const ENV_HELP: &str = "\
Configuration layers, later wins: built-in defaults, the --config TOML file,
environment variables, then command-line flags. Every key has an environment
form with the CANOPY_ prefix, dots replaced by underscores and upper-cased,
e.g. window.size -> CANOPY_WINDOW_SIZE, score.variant -> CANOPY_SCORE_VARIANT.

Exit codes: 0 success, 1 other failure, 2 usage or invalid configuration,
3 missing input file, 4 malformed input, 5 model/window mismatch.";

#[derive(Debug, Parser)]
#[command(name = "canopy", version, about, after_help = ENV_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for per-pixel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Sets any configuration key, e.g. `--set train.epochs=10`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_key_value)]
    pub overrides: Vec<(String, String)>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: observations.csv and truth.csv.
    Synth(SynthArgs),
    /// Turn raw observations into gap-free weekly series.
    Preprocess(PreprocessArgs),
    /// Train and calibrate an autoencoder on healthy pixels.
    Train(TrainArgs),
    /// Score series with a trained model and write per-week flags.
    Detect(DetectArgs),
    /// Classify pixels against defoliation labels and write a report.
    Evaluate(EvaluateArgs),
    /// Render per-pixel scores or first-anomaly weeks as a raster.
    Map(MapArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub width: usize,
    #[arg(long, default_value_t = 20)]
    pub height: usize,
    #[arg(long, default_value_t = 5)]
    pub years: u32,
    /// Fraction of pixels that decline.
    #[arg(long, default_value_t = 0.3)]
    pub disturbed: f64,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Observations as CSV, or NDJSON when the name ends in `.ndjson`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Preprocessed series CSV.
    #[arg(long, value_name = "FILE")]
    pub series: PathBuf,
    /// Ground truth; pixels with an onset are excluded. Without it, pixels
    /// meeting the defoliation rule are excluded.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Window length; overrides `window.size`.
    #[arg(long)]
    pub window: Option<usize>,
    /// `full` or `desk`; overrides `model.preset`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Share of healthy pixels held out to calibrate thresholds.
    #[arg(long, default_value_t = 0.3)]
    pub calibration_fraction: f64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub series: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Expected window length; a model trained on another length is refused.
    #[arg(long)]
    pub window: Option<usize>,
    /// Error variant; overrides `score.variant`.
    #[arg(long)]
    pub variant: Option<String>,
    /// Explicit threshold instead of the calibrated one.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Step between scored windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IndexArg {
    Ndvi,
    Tcw,
}

impl From<IndexArg> for VegetationIndex {
    fn from(i: IndexArg) -> Self {
        match i {
            IndexArg::Ndvi => VegetationIndex::Ndvi,
            IndexArg::Tcw => VegetationIndex::Tcw,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Flags written by `detect`.
    #[arg(long, value_name = "FILE", required_unless_present = "baseline", conflicts_with = "baseline")]
    pub flags: Option<PathBuf>,
    /// Evaluate the harmonic break baseline on this index instead of flags.
    #[arg(long, value_enum, requires = "series")]
    pub baseline: Option<IndexArg>,
    /// Preprocessed series; needed by the baseline and for rule-based labels.
    #[arg(long, value_name = "FILE")]
    pub series: Option<PathBuf>,
    /// Ground truth with defoliation weeks. Without it, labels come from
    /// applying the defoliation rule to `--series`.
    #[arg(long, value_name = "FILE", required_unless_present = "series")]
    pub truth: Option<PathBuf>,
    /// End of the baseline's training period (default: two years after the
    /// first week).
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub train_end: Option<chrono::NaiveDate>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayerArg {
    PdScore,
    FirstAnomaly,
}

impl From<LayerArg> for MapLayer {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::PdScore => MapLayer::PdScore,
            LayerArg::FirstAnomaly => MapLayer::FirstAnomaly,
        }
    }
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Records written by `evaluate`.
    #[arg(long, value_name = "FILE")]
    pub records: PathBuf,
    #[arg(long, value_enum, default_value = "pd-score")]
    pub layer: LayerArg,
    /// Portable pixmap output; the value grid goes next to it as `.csv`.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

/// Exit code for a failure, from the first recognised cause in the chain.
fn exit_code(err: &anyhow::Error) -> u8 {
    use canopy_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
                E::Io { .. } => 1,
                E::Config(_) => 2,
                E::WindowMismatch { .. } => 5,
                E::Parse { .. }
                | E::Csv(_)
                | E::Json(_)
                | E::Integrity(_)
                | E::Format(_)
                | E::Checksum { .. }
                | E::Version { .. }
                | E::Shape(_)
                | E::GridAlignment { .. }
                | E::InsufficientData(_)
                | E::DegenerateScale { .. }
                | E::EmptyInput(_) => 4,
                E::Divergence { .. } => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::NotFound { 3 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
