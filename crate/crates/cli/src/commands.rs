use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;

use desra_core::calibration::{calibrate_records, load_weights, save_weights, DEFAULT_PERCENTILE};
use desra_core::error::check_dims;
use desra_core::evaluation::{aggregate, check_overlap, evaluate_image, threshold_sweep, ImageEval, DEFAULT_OVERLAP};
use desra_core::exec::{map_ordered, with_jobs};
use desra_core::image_io::{load_mask, read_manifest, save_mask, save_rgb};
use desra_core::mask::detect_full;
use desra_core::pseudo_gt::emit_training_manifest;
use desra_core::{
    AdjustmentTable, ArtifactMask, BitDepth, DetectionConfig, Error, ManifestRecord, RgbImage, Variant, NUM_CLASSES,
};

use crate::args::{CalibrateArgs, Cli, Command, CompositeArgs, DetectArgs, EvaluateArgs, Rgba, RunOptions, SweepArgs};

/// Name of the per-run detection manifest.
pub const DETECTIONS_MANIFEST: &str = "detections.jsonl";

pub fn mask_file_name(id: &str) -> String {
    format!("{id}_mask.png")
}

pub fn overlay_file_name(id: &str) -> String {
    format!("{id}_overlay.png")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Partial { failed: usize, total: usize },
}

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::config(e)
    }
}

type CmdResult = Result<Outcome, Failure>;

pub fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Detect(a) => detect(a),
        Command::Composite(a) => composite(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Built-in defaults, then the config file, then flags.
pub fn effective_config(run: &RunOptions) -> anyhow::Result<DetectionConfig> {
    let mut cfg = match &run.config {
        Some(path) => {
            DetectionConfig::from_kv_file(path).with_context(|| format!("reading config {}", path.display()))?
        }
        None => DetectionConfig::default(),
    };
    run.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn records(run: &RunOptions) -> anyhow::Result<Vec<ManifestRecord>> {
    let records =
        read_manifest(&run.manifest).with_context(|| format!("reading manifest {}", run.manifest.display()))?;
    if records.is_empty() {
        bail!("no records in {}", run.manifest.display());
    }
    if let Some(r) = records
        .iter()
        .find(|r| r.id.is_empty() || r.id.contains(['/', '\\']) || r.id == "." || r.id == "..")
    {
        bail!("record id {:?} cannot be used as a file name", r.id);
    }
    Ok(records)
}

fn weights_for(path: Option<&Path>, cfg: &DetectionConfig) -> anyhow::Result<AdjustmentTable> {
    match path {
        Some(p) => {
            let table = load_weights(p).with_context(|| format!("reading weights {}", p.display()))?;
            if table.c_used != cfg.c {
                log::warn!(
                    "weights were calibrated with C = {} but detection uses C = {}",
                    table.c_used,
                    cfg.c
                );
            }
            Ok(table)
        }
        None if cfg.variant == Variant::NoSemantics => Ok(AdjustmentTable::uniform(NUM_CLASSES)),
        None => bail!("--weights is required unless --variant no_semantics"),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn report_failures<T>(results: &[Result<T, Error>]) -> Outcome {
    let failed = results.iter().filter(|r| r.is_err()).count();
    for e in results.iter().filter_map(|r| r.as_ref().err()) {
        log::error!("{e}");
    }
    if failed == 0 {
        Outcome::Success
    } else {
        Outcome::Partial {
            failed,
            total: results.len(),
        }
    }
}

fn calibrate(args: &CalibrateArgs) -> CmdResult {
    let cfg = effective_config(&args.run)?;
    let records = records(&args.run)?;
    let percentile = args.percentile.unwrap_or(DEFAULT_PERCENTILE);
    let corpus_id = args.corpus_id.clone().unwrap_or_else(|| {
        args.run
            .manifest
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let table = with_jobs(args.run.jobs, |exec| {
        calibrate_records(&records, &cfg, percentile, args.histogram, &corpus_id, exec)
    })?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_weights(&table, &args.out)?;
    let seen = table.seen.iter().filter(|&&s| s).count();
    log::info!("wrote {} ({seen} of {} classes observed)", args.out.display(), table.classes());
    Ok(Outcome::Success)
}

/// GAN image tinted with `color` where the mask is set, as 8-bit RGB.
pub fn overlay(gan: &RgbImage, mask: &ArtifactMask, color: Rgba) -> desra_core::Result<RgbImage> {
    check_dims(gan.dims(), mask.dims())?;
    let [r, g, b, a] = color.0;
    let alpha = a as f64 / 255.0;
    let tint = [r, g, b].map(|c| c as f64 / 255.0);
    RgbImage::from_fn(gan.width(), gan.height(), BitDepth::Eight, |x, y| {
        let px = gan.pixel(x, y);
        if mask.get(x, y) {
            [0, 1, 2].map(|i| (1.0 - alpha) * px[i] + alpha * tint[i])
        } else {
            px
        }
    })
}

#[derive(Debug, Clone, Serialize)]
struct DetectionLine {
    id: String,
    mask: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    overlay: Option<String>,
    regions: usize,
    artifact_fraction: f64,
    config: DetectionConfig,
}

fn detect(args: &DetectArgs) -> CmdResult {
    let cfg = effective_config(&args.run)?;
    let records = records(&args.run)?;
    let weights = weights_for(args.weights.as_deref(), &cfg)?;
    let out = &args.output_dir;
    create_dir(out)?;

    let results = with_jobs(args.run.jobs, |exec| {
        map_ordered(&records, exec, |rec| {
            let run = || -> desra_core::Result<DetectionLine> {
                let loaded = rec.load()?;
                let det = detect_full(&loaded.mse, &loaded.gan, &loaded.labels, &weights, &cfg, exec)?;
                let mask = mask_file_name(&rec.id);
                save_mask(&det.mask, out.join(&mask))?;
                let overlay_name = if args.overlay {
                    let name = overlay_file_name(&rec.id);
                    save_rgb(&overlay(&loaded.gan, &det.mask, args.overlay_color)?, out.join(&name))?;
                    Some(name)
                } else {
                    None
                };
                log::info!("detect {}: {} region(s)", rec.id, det.regions.len());
                Ok(DetectionLine {
                    id: rec.id.clone(),
                    mask,
                    overlay: overlay_name,
                    regions: det.regions.len(),
                    artifact_fraction: det.artifact_fraction(),
                    config: cfg.clone(),
                })
            };
            run().map_err(|e| e.in_record(&rec.id))
        })
    });

    let mut text = Vec::new();
    for line in results.iter().flatten() {
        serde_json::to_writer(&mut text, line).map_err(|e| anyhow!(e))?;
        text.push(b'\n');
    }
    write_file(&out.join(DETECTIONS_MANIFEST), text)?;
    Ok(report_failures(&results))
}

fn composite(args: &CompositeArgs) -> CmdResult {
    let records = records(&args.run)?;
    let mut items = Vec::with_capacity(records.len());
    for rec in records {
        let path = args.masks_dir.join(mask_file_name(&rec.id));
        let mask = if path.is_file() {
            Some(load_mask(&path).map_err(|e| e.in_record(&rec.id))?)
        } else {
            None
        };
        items.push((rec, mask));
    }
    let set = with_jobs(args.run.jobs, |exec| emit_training_manifest(&items, &args.output_dir, exec))?;
    log::info!("wrote {} pseudo ground-truth image(s) to {}", set.records.len(), args.output_dir.display());
    Ok(Outcome::Success)
}

/// Config echoed by a previous `detect` run into `dir`, if any.
fn detection_config_in(dir: &Path) -> Option<DetectionConfig> {
    #[derive(serde::Deserialize)]
    struct Line {
        config: DetectionConfig,
    }
    let text = fs::read_to_string(dir.join(DETECTIONS_MANIFEST)).ok()?;
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    serde_json::from_str::<Line>(first).ok().map(|l| l.config)
}

fn overlap(p: Option<f64>) -> anyhow::Result<f64> {
    let p = p.unwrap_or(DEFAULT_OVERLAP);
    check_overlap(p)?;
    Ok(p)
}

fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let records = records(&args.run)?;
    let p = overlap(args.p)?;
    let mut jobs: Vec<(&ManifestRecord, PathBuf, PathBuf)> = Vec::with_capacity(records.len());
    for rec in &records {
        let gt = rec.gt_mask_path.clone().ok_or_else(|| Error::MissingGtMask(rec.id.clone()))?;
        let det = args.masks_dir.join(mask_file_name(&rec.id));
        if !det.is_file() {
            return Err(Error::MissingMask(rec.id.clone()).into());
        }
        jobs.push((rec, det, gt));
    }
    let results: Vec<Result<ImageEval, Error>> = with_jobs(args.run.jobs, |exec| {
        map_ordered(&jobs, exec, |(rec, det, gt)| {
            let run = || {
                let detected = load_mask(det)?;
                let gt = load_mask(gt)?;
                evaluate_image(&rec.id, &detected, &gt, p, args.improved)
            };
            run().map_err(|e| e.in_record(&rec.id))
        })
    });
    let outcome = report_failures(&results);
    let evals: Vec<ImageEval> = results.into_iter().filter_map(Result::ok).collect();
    let report = aggregate(&evals)
        .map_err(|e| Failure {
            code: 1,
            error: anyhow!("no record could be evaluated: {e}"),
        })?
        .with_echo(p, detection_config_in(&args.masks_dir));
    let out = args.out.clone().unwrap_or_else(|| args.masks_dir.join("report.json"));
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| anyhow!(e))?;
    text.push('\n');
    write_file(&out, text)?;
    log::info!("wrote {}", out.display());
    Ok(outcome)
}

fn sweep(args: &SweepArgs) -> CmdResult {
    let cfg = effective_config(&args.run)?;
    let records = records(&args.run)?;
    let weights = weights_for(args.weights.as_deref(), &cfg)?;
    let p = overlap(args.p)?;
    let table = with_jobs(args.run.jobs, |exec| {
        threshold_sweep(&records, &weights, &cfg, &args.thresholds, p, exec)
    })
    .map_err(|e| {
        let code = match &e {
            Error::Record { source, .. } if !matches!(**source, Error::MissingGtMask(_)) => 1,
            _ => 2,
        };
        Failure {
            code,
            error: e.into(),
        }
    })?;
    create_dir(&args.output_dir)?;
    let mut json = serde_json::to_string_pretty(&table).map_err(|e| anyhow!(e))?;
    json.push('\n');
    write_file(&args.output_dir.join("sweep.json"), json)?;
    let text = table.render_text();
    write_file(&args.output_dir.join("sweep.txt"), &text)?;
    print!("{text}");
    Ok(Outcome::Success)
}
