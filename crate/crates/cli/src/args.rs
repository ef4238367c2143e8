use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use desra_core::calibration::DEFAULT_PERCENTILE;
use desra_core::config::{DEFAULT_HOLE_SE, DEFAULT_MIN_AREA, DEFAULT_SE, DEFAULT_THRESHOLD};
use desra_core::evaluation::DEFAULT_OVERLAP;
use desra_core::exec::default_jobs;
use desra_core::local_stats::{DEFAULT_C, DEFAULT_SIGMA_FLOOR, DEFAULT_WINDOW};
use desra_core::{Connectivity, DetectionConfig, HoleFill, Variant};

fn with_default(text: &str, value: impl Display) -> String {
    format!("{text} [default: {value}]")
}

fn parse_jobs(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("jobs must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// RGBA color written as `R,G,B,A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgba(pub [u8; 4]);

impl std::str::FromStr for Rgba {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!("expected R,G,B,A, got {s:?}"));
        }
        let mut out = [0u8; 4];
        for (o, p) in out.iter_mut().zip(&parts) {
            *o = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
        }
        Ok(Rgba(out))
    }
}

impl Display for Rgba {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [r, g, b, a] = self.0;
        write!(f, "{r},{g},{b},{a}")
    }
}

#[derive(Debug, Parser)]
#[command(name = "desra", version, about = "Detect GAN-inference artifacts in super-resolution output")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate per-class adjustment weights over a corpus.
    Calibrate(CalibrateArgs),
    /// Write artifact masks for every manifest record.
    Detect(DetectArgs),
    /// Build pseudo ground truth from GAN/MSE pairs and their masks.
    Composite(CompositeArgs),
    /// Score detected masks against ground truth.
    Evaluate(EvaluateArgs),
    /// Run detection and evaluation over a list of thresholds.
    Sweep(SweepArgs),
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    /// JSON-Lines manifest of records.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,

    /// Flat `key = value` detection config; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker count.
    #[arg(short, long, default_value_t = default_jobs(), value_parser = parse_jobs)]
    pub jobs: usize,

    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

/// Per-field detection config overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    #[arg(long, value_name = "N", help = with_default("Local window size (odd)", DEFAULT_WINDOW))]
    pub window: Option<usize>,

    #[arg(long = "c", visible_alias = "C", value_name = "C", help = with_default("Similarity stabilizer", DEFAULT_C))]
    pub c: Option<f64>,

    #[arg(long, help = with_default("Flat-region guard on σ", DEFAULT_SIGMA_FLOOR))]
    pub sigma_floor: Option<f64>,

    #[arg(long, help = with_default("Artifact threshold on D / A_k", DEFAULT_THRESHOLD))]
    pub threshold: Option<f64>,

    #[arg(long, value_name = "SIZE", help = with_default("Erosion element size", DEFAULT_SE))]
    pub erosion_se: Option<usize>,

    #[arg(long, value_name = "SIZE", help = with_default("Dilation element size", DEFAULT_SE))]
    pub dilation_se: Option<usize>,

    #[arg(long, help = with_default("Hole filling method (flood_fill, closing)", "flood_fill"))]
    pub hole_fill: Option<HoleFill>,

    #[arg(long, value_name = "SIZE", help = with_default("Closing element size", DEFAULT_HOLE_SE))]
    pub hole_se: Option<usize>,

    #[arg(long, value_name = "4|8", help = with_default("Background connectivity for hole filling", 4))]
    pub fill_connectivity: Option<Connectivity>,

    #[arg(long, value_name = "4|8", help = with_default("Region connectivity", 8))]
    pub component_connectivity: Option<Connectivity>,

    #[arg(long, value_name = "PIXELS", help = with_default("Smallest region kept", DEFAULT_MIN_AREA))]
    pub min_area: Option<usize>,

    #[arg(long, help = with_default("Detector variant (full, abs_d, no_normalize, no_semantics)", "full"))]
    pub variant: Option<Variant>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut DetectionConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(
            window,
            c,
            sigma_floor,
            threshold,
            erosion_se,
            dilation_se,
            hole_fill,
            hole_se,
            fill_connectivity,
            component_connectivity,
            min_area,
            variant
        );
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunOptions,

    /// Weights file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    #[arg(long, help = with_default("Descending percentile of D per class", DEFAULT_PERCENTILE))]
    pub percentile: Option<f64>,

    /// Bounded-memory histogram accumulation instead of exact values.
    #[arg(long)]
    pub histogram: bool,

    /// Identifier stored in the weights file (manifest file stem by default).
    #[arg(long)]
    pub corpus_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub run: RunOptions,

    /// Calibrated weights; optional with `--variant no_semantics`.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    /// Directory receiving masks, overlays and detections.jsonl.
    #[arg(long, visible_alias = "out", value_name = "DIR")]
    pub output_dir: PathBuf,

    /// Also write `<id>_overlay.png`.
    #[arg(long)]
    pub overlay: bool,

    /// Overlay color as R,G,B,A.
    #[arg(long, default_value_t = Rgba([255, 0, 0, 128]))]
    pub overlay_color: Rgba,
}

#[derive(Debug, Args)]
pub struct CompositeArgs {
    #[command(flatten)]
    pub run: RunOptions,

    /// Directory holding `<id>_mask.png` files.
    #[arg(long, value_name = "DIR")]
    pub masks_dir: PathBuf,

    /// Directory receiving pseudo ground-truth images and pseudo_gt.jsonl.
    #[arg(long, visible_alias = "out", value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunOptions,

    /// Directory holding `<id>_mask.png` files.
    #[arg(long, value_name = "DIR")]
    pub masks_dir: PathBuf,

    /// Report file (defaults to report.json in the masks directory).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    #[arg(long = "p", value_name = "P", help = with_default("Region overlap threshold", DEFAULT_OVERLAP))]
    pub p: Option<f64>,

    /// Also report removal and addition rates.
    #[arg(long)]
    pub improved: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunOptions,

    /// Calibrated weights; optional with `--variant no_semantics`.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,

    /// Directory receiving sweep.json and sweep.txt.
    #[arg(long, visible_alias = "out", value_name = "DIR")]
    pub output_dir: PathBuf,

    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.7,0.8,0.9")]
    pub thresholds: Vec<f64>,

    #[arg(long = "p", value_name = "P", help = with_default("Region overlap threshold", DEFAULT_OVERLAP))]
    pub p: Option<f64>,
}
