//! Command-line surface: `conformal-box {calibrate|conformalize|evaluate|
//! validate-coverage|render}`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conformal_box_core::{ScoreMode, SplitLabel, SplitSizes};

/// Fixed default seed, used whenever `--seed` is omitted. Runs never draw
/// wall-clock entropy, so identical invocations are byte-identical.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "conformal-box",
    version,
    about = "Calibrate, apply, and evaluate conformal bounding boxes",
    long_about = "Conformalizes bounding-box predictions from any object detector: \
                  calibrates per-coordinate margins on held-out data, applies them to \
                  produce boxes with a guaranteed box-wise coverage rate, and evaluates \
                  coverage, stretch, and average precision."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Calibrate per-coordinate margins from paired detections.
    Calibrate(CalibrateArgs),
    /// Apply calibrated margins to detections.
    Conformalize(ConformalizeArgs),
    /// Evaluate coverage, stretch, and average precision.
    Evaluate(EvaluateArgs),
    /// Monte Carlo validation of the coverage guarantee on synthetic data.
    ValidateCoverage(ValidateCoverageArgs),
    /// Render per-image SVG overlays of predictions, conformal boxes, and truths.
    Render(RenderArgs),
}

/// Input files shared by the data-driven commands.
#[derive(Args)]
pub struct DataArgs {
    /// COCO annotation JSON with ground-truth boxes.
    #[arg(long, value_name = "FILE")]
    pub gt: PathBuf,
    /// COCO results JSON with detections.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Keep only annotations and detections with this category id.
    #[arg(long, value_name = "ID")]
    pub category: Option<u64>,
    /// Drop detections scoring strictly below this floor.
    #[arg(long, value_name = "SCORE", default_value_t = 0.0)]
    pub score_floor: f64,
}

/// Optional deterministic partition of the input before running.
#[derive(Args)]
pub struct SplitArgs {
    /// Partition the images as VAL,CAL,TEST before running (e.g. 300,700,395).
    #[arg(long, value_name = "V,C,T", value_parser = parse_split_sizes)]
    pub split: Option<SplitSizes>,
    /// Subset to operate on when --split is given (command-specific default).
    #[arg(long, value_enum, value_name = "SUBSET")]
    pub subset: Option<SubsetArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Validation,
    Calibration,
    Test,
}

impl From<SubsetArg> for SplitLabel {
    fn from(value: SubsetArg) -> Self {
        match value {
            SubsetArg::Validation => SplitLabel::Validation,
            SubsetArg::Calibration => SplitLabel::Calibration,
            SubsetArg::Test => SplitLabel::Test,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Additive,
    Multiplicative,
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<ScoreMode> {
        match self {
            ModeArg::Additive => vec![ScoreMode::Additive],
            ModeArg::Multiplicative => vec![ScoreMode::Multiplicative],
            ModeArg::Both => vec![ScoreMode::Additive, ScoreMode::Multiplicative],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SingleModeArg {
    Additive,
    Multiplicative,
}

impl From<SingleModeArg> for ScoreMode {
    fn from(value: SingleModeArg) -> Self {
        match value {
            SingleModeArg::Additive => ScoreMode::Additive,
            SingleModeArg::Multiplicative => ScoreMode::Multiplicative,
        }
    }
}

fn parse_split_sizes(text: &str) -> Result<SplitSizes, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated sizes, e.g. 300,700,395".to_string());
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| format!("invalid size '{s}': {e}"))
    };
    Ok(SplitSizes {
        n_validation: parse(parts[0])?,
        n_calibration: parse(parts[1])?,
        n_test: parse(parts[2])?,
    })
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Margins output file. With --mode both, the mode name is inserted
    /// before the extension (margins.json -> margins.additive.json).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Target miscoverage rate (nominal coverage is 1 - alpha).
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Nonconformity score family.
    #[arg(long, value_enum, default_value = "additive")]
    pub mode: ModeArg,
    /// IoU threshold of the pairing mechanism.
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
    /// Seed for the --split shuffle.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the per-image match reports (pairs, FPs, FNs) as JSON.
    #[arg(long, value_name = "FILE")]
    pub dump_matches: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConformalizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Calibrated margins JSON (from `calibrate`).
    #[arg(long, value_name = "FILE")]
    pub margins: PathBuf,
    /// Conformalized detections output (COCO results JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Expected score mode; errors if the margins file disagrees.
    #[arg(long, value_enum)]
    pub mode: Option<SingleModeArg>,
    /// Clamp conformalized boxes to their image frame.
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Report output file. PR curves are written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Margins JSON to evaluate (repeat for both modes).
    #[arg(long, value_name = "FILE")]
    pub margins: Vec<PathBuf>,
    /// IoU threshold of the pairing mechanism.
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
    /// IoU thresholds for average precision (repeatable).
    #[arg(long = "ap-iou", value_name = "IOU", default_values_t = [0.3, 0.8])]
    pub ap_iou: Vec<f64>,
    /// Also export the PR curves as CSV.
    #[arg(long)]
    pub pr_csv: bool,
    /// Seed for the --split shuffle.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the per-image match reports (pairs, FPs, FNs) as JSON.
    #[arg(long, value_name = "FILE")]
    pub dump_matches: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateCoverageArgs {
    /// Monte Carlo report output file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Synthetic generator config JSON; built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    pub gen_config: Option<PathBuf>,
    /// Target miscoverage rate.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Nonconformity score family.
    #[arg(long, value_enum, default_value = "additive")]
    pub mode: SingleModeArg,
    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,
    /// Fraction of images used for calibration in each repetition.
    #[arg(long, default_value_t = 0.5)]
    pub cal_fraction: f64,
    /// IoU threshold of the pairing mechanism.
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
    /// Base seed; repetition i uses seed + i. Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Re-split one fixed dataset instead of generating fresh data per repetition.
    #[arg(long)]
    pub resplit: bool,
}

#[derive(Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Calibrated margins JSON.
    #[arg(long, value_name = "FILE")]
    pub margins: PathBuf,
    /// Directory for the per-image SVG files.
    #[arg(long = "out", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Directory with the raster images named in the annotations; overlays
    /// fall back to a blank frame when missing.
    #[arg(long, value_name = "DIR")]
    pub images: Option<PathBuf>,
    /// Clamp conformalized boxes to the image frame before drawing.
    #[arg(long)]
    pub clamp: bool,
}
