//! Mask scoring: pixel IoU, region-level precision and recall, and
//! removal/addition rates for a fine-tuned model's detections.
//!
//! Regions are 8-connected components. A detected region is correct when
//! more than a fraction `p` of it lies inside the ground truth; a
//! ground-truth region is recalled when more than `p` of it is detected.
//! Dataset precision and recall micro-aggregate the region counts.

use std::fmt::Write as _;

use serde::Serialize;

use crate::calibration::AdjustmentTable;
use crate::config::{Connectivity, DetectionConfig};
use crate::error::{check_dims, Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::image_io::{ArtifactMask, ManifestRecord};
use crate::mask::{connected_components, finish_detection, similarity_map, RegionSet};

pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const REGION_CONNECTIVITY: Connectivity = Connectivity::Eight;

/// `|A ∩ B| / |A ∪ B|`; 1 when both masks are empty.
pub fn iou(detected: &ArtifactMask, gt: &ArtifactMask) -> Result<f64> {
    check_dims(detected.dims(), gt.dims())?;
    let union = detected.union_count(gt);
    if union == 0 {
        return Ok(1.0);
    }
    Ok(detected.intersection_count(gt) as f64 / union as f64)
}

/// Fails unless the overlap threshold lies strictly inside `(0, 1)`.
pub fn check_overlap(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("overlap threshold p = {p} outside (0, 1)")))
    }
}

/// Regions of `regions` whose covered fraction by `other` exceeds `p`,
/// returned with the total region count.
fn covered_regions(regions: &RegionSet, other: &ArtifactMask, p: f64) -> Result<(usize, usize)> {
    check_overlap(p)?;
    check_dims(regions.dims(), other.dims())?;
    let overlaps = regions.overlap_counts(other);
    let hits = regions
        .regions()
        .iter()
        .zip(&overlaps)
        .filter(|(r, &o)| o as f64 / r.area as f64 > p)
        .count();
    Ok((hits, regions.len()))
}

/// `(N_T, N_S)`: detected regions mostly inside the ground truth, and all detected regions.
pub fn region_precision(detected: &RegionSet, gt: &ArtifactMask, p: f64) -> Result<(usize, usize)> {
    covered_regions(detected, gt, p)
}

/// `(N_R, N_G)`: ground-truth regions mostly covered by detections, and all ground-truth regions.
pub fn region_recall(gt_regions: &RegionSet, detected: &ArtifactMask, p: f64) -> Result<(usize, usize)> {
    covered_regions(gt_regions, detected, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RemovalAddition {
    /// Ground-truth regions with no detected pixel at all after fine-tuning.
    pub removed: usize,
    pub gt_regions: usize,
    /// Detected regions touching no ground-truth pixel.
    pub added: usize,
    pub detected_regions: usize,
}

impl RemovalAddition {
    pub fn removal_rate(&self) -> Option<f64> {
        ratio(self.removed, self.gt_regions)
    }

    pub fn addition_rate(&self) -> Option<f64> {
        ratio(self.added, self.detected_regions)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn removal_addition(detected_after: &RegionSet, gt: &RegionSet) -> Result<RemovalAddition> {
    check_dims(detected_after.dims(), gt.dims())?;
    let detected_mask = detected_after.support();
    let gt_mask = gt.support();
    let removed = gt.overlap_counts(&detected_mask).iter().filter(|&&o| o == 0).count();
    let added = detected_after.overlap_counts(&gt_mask).iter().filter(|&&o| o == 0).count();
    Ok(RemovalAddition {
        removed,
        gt_regions: gt.len(),
        added,
        detected_regions: detected_after.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageEval {
    pub id: String,
    pub iou: f64,
    pub detected_regions: usize,
    pub correct_regions: usize,
    pub gt_regions: usize,
    pub recalled_regions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed_regions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub added_regions: Option<usize>,
}

/// Scores one detection against its ground truth; `improved` adds the
/// removal/addition counts.
pub fn evaluate_image(
    id: &str,
    detected: &ArtifactMask,
    gt: &ArtifactMask,
    p: f64,
    improved: bool,
) -> Result<ImageEval> {
    let det_regions = connected_components(detected, REGION_CONNECTIVITY);
    let gt_regions = connected_components(gt, REGION_CONNECTIVITY);
    let iou = iou(detected, gt)?;
    let (nt, ns) = region_precision(&det_regions, gt, p)?;
    let (nr, ng) = region_recall(&gt_regions, detected, p)?;
    let (removed, added) = if improved {
        let ra = removal_addition(&det_regions, &gt_regions)?;
        (Some(ra.removed), Some(ra.added))
    } else {
        (None, None)
    };
    Ok(ImageEval {
        id: id.to_string(),
        iou,
        detected_regions: ns,
        correct_regions: nt,
        gt_regions: ng,
        recalled_regions: nr,
        removed_regions: removed,
        added_regions: added,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mean_iou_percent: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removal_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addition_rate: Option<f64>,
    pub images: usize,
    pub correct_regions: usize,
    pub detected_regions: usize,
    pub recalled_regions: usize,
    pub gt_regions: usize,
    pub precision_aggregation: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_echo: Option<DetectionConfig>,
    pub per_image: Vec<ImageEval>,
}

/// Mean IoU in percent plus micro-aggregated precision, recall and rates.
pub fn aggregate(evals: &[ImageEval]) -> Result<EvalReport> {
    if evals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum = |f: fn(&ImageEval) -> usize| evals.iter().map(f).sum::<usize>();
    let nt = sum(|e| e.correct_regions);
    let ns = sum(|e| e.detected_regions);
    let nr = sum(|e| e.recalled_regions);
    let ng = sum(|e| e.gt_regions);
    let improved = evals.iter().all(|e| e.removed_regions.is_some() && e.added_regions.is_some());
    let (removal_rate, addition_rate) = if improved {
        let removed = evals.iter().filter_map(|e| e.removed_regions).sum();
        let added = evals.iter().filter_map(|e| e.added_regions).sum();
        (ratio(removed, ng), ratio(added, ns))
    } else {
        (None, None)
    };
    let mean_iou = evals.iter().map(|e| e.iou).sum::<f64>() / evals.len() as f64;
    Ok(EvalReport {
        mean_iou_percent: mean_iou * 100.0,
        precision: ratio(nt, ns),
        recall: ratio(nr, ng),
        removal_rate,
        addition_rate,
        images: evals.len(),
        correct_regions: nt,
        detected_regions: ns,
        recalled_regions: nr,
        gt_regions: ng,
        precision_aggregation: "micro",
        overlap_p: None,
        config_echo: None,
        per_image: evals.to_vec(),
    })
}

impl EvalReport {
    pub fn with_echo(mut self, p: f64, config: Option<DetectionConfig>) -> Self {
        self.overlap_p = Some(p);
        self.config_echo = config;
        self
    }

    /// `Precision × Recall`, the model-selection score of a sweep.
    pub fn product(&self) -> Option<f64> {
        Some(self.precision? * self.recall?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub mean_iou_percent: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub precision_x_recall: Option<f64>,
    #[serde(skip)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Index of the row with the largest `Precision × Recall` (first on ties).
    pub best: Option<usize>,
    pub overlap_p: f64,
    pub config_echo: DetectionConfig,
}

impl SweepTable {
    pub fn render_text(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>9}  {:>6}  {:>9}  {:>9}  {:>16}",
            "threshold", "IoU", "Precision", "Recall", "Precision×Recall"
        );
        for (i, r) in self.rows.iter().enumerate() {
            let mark = if Some(i) == self.best { " *" } else { "" };
            let _ = writeln!(
                out,
                "{:>9.3}  {:>6.1}  {:>9}  {:>9}  {:>16}{mark}",
                r.threshold,
                r.mean_iou_percent,
                fmt_opt(r.precision),
                fmt_opt(r.recall),
                fmt_opt(r.precision_x_recall),
            );
        }
        out
    }
}

/// Per record: load, compute the similarity map once, then binarize and
/// post-process at every threshold. One aggregated row per threshold.
pub fn threshold_sweep(
    records: &[ManifestRecord],
    weights: &AdjustmentTable,
    cfg: &DetectionConfig,
    thresholds: &[f64],
    p: f64,
    exec: Execution,
) -> Result<SweepTable> {
    check_overlap(p)?;
    if records.is_empty() || thresholds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(r) = records.iter().find(|r| r.gt_mask_path.is_none()) {
        return Err(Error::MissingGtMask(r.id.clone()));
    }
    let configs = thresholds
        .iter()
        .map(|&t| {
            let c = cfg.clone().with_threshold(t);
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;

    let per_record = map_ordered(records, exec, |rec| -> Result<Vec<ImageEval>> {
        let run = || -> Result<Vec<ImageEval>> {
            let loaded = rec.load()?;
            let gt = loaded.gt_mask.as_ref().ok_or_else(|| Error::MissingGtMask(rec.id.clone()))?;
            let d_map = similarity_map(&loaded.mse, &loaded.gan, cfg, exec)?;
            configs
                .iter()
                .map(|c| {
                    let det = finish_detection(&d_map, &loaded.labels, weights, c)?;
                    evaluate_image(&rec.id, &det.mask, gt, p, false)
                })
                .collect()
        };
        run().map_err(|e| e.in_record(&rec.id))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(thresholds.len());
    for (ti, c) in configs.iter().enumerate() {
        let evals: Vec<ImageEval> = per_record.iter().map(|r| r[ti].clone()).collect();
        let report = aggregate(&evals)?.with_echo(p, Some(c.clone()));
        rows.push(SweepRow {
            threshold: c.threshold,
            mean_iou_percent: report.mean_iou_percent,
            precision: report.precision,
            recall: report.recall,
            precision_x_recall: report.product(),
            report,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.precision_x_recall.map(|v| (i, v)))
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i);
    Ok(SweepTable {
        rows,
        best,
        overlap_p: p,
        config_echo: cfg.clone(),
    })
}
