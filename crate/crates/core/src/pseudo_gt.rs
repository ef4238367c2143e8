//! Pseudo ground truth: GAN-SR pixels with detected artifact regions
//! replaced by the MSE-SR result, packaged as fine-tuning pairs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{check_dims, Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::image_io::{load_rgb, save_rgb, ArtifactMask, ManifestRecord, RgbImage};

/// File name of the pair manifest written by [`emit_training_manifest`].
pub const TRAINING_MANIFEST: &str = "pseudo_gt.jsonl";

/// `ỹ = M · y_MSE + (1 − M) · y_GAN` with binary `M`: plain per-pixel
/// selection, no blending. The output keeps the GAN image's bit depth.
pub fn composite(gan: &RgbImage, mse: &RgbImage, mask: &ArtifactMask) -> Result<RgbImage> {
    check_dims(gan.dims(), mse.dims())?;
    check_dims(gan.dims(), mask.dims())?;
    let samples = gan
        .samples()
        .chunks_exact(3)
        .zip(mse.samples().chunks_exact(3))
        .zip(mask.bits())
        .flat_map(|((g, m), &art)| if art { [m[0], m[1], m[2]] } else { [g[0], g[1], g[2]] })
        .collect();
    RgbImage::new(gan.width(), gan.height(), samples, gan.bit_depth())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoGtRecord {
    pub id: String,
    #[serde(rename = "lr")]
    pub lr_path: Option<PathBuf>,
    #[serde(rename = "pseudo_gt")]
    pub pseudo_gt_path: PathBuf,
    #[serde(skip)]
    pub mask_popcount: usize,
    pub replaced_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub records: Vec<PseudoGtRecord>,
    pub manifest_path: PathBuf,
    /// Records written without a low-resolution input path.
    pub missing_lr: usize,
}

fn pseudo_gt_name(id: &str) -> String {
    format!("{id}_pseudo_gt.png")
}

fn build_one(record: &ManifestRecord, mask: &ArtifactMask, out_dir: &Path) -> Result<PseudoGtRecord> {
    let gan = load_rgb(&record.gan_path)?;
    let mse = load_rgb(&record.mse_path)?;
    let merged = composite(&gan, &mse, mask)?;
    let name = pseudo_gt_name(&record.id);
    save_rgb(&merged, out_dir.join(&name))?;
    let popcount = mask.popcount();
    let lr_path = match &record.lr_path {
        Some(p) => Some(std::path::absolute(p)?),
        None => None,
    };
    Ok(PseudoGtRecord {
        id: record.id.clone(),
        lr_path,
        pseudo_gt_path: PathBuf::from(name),
        mask_popcount: popcount,
        replaced_fraction: popcount as f64 / (gan.width() * gan.height()) as f64,
    })
}

/// Writes `<id>_pseudo_gt.png` for each record and a JSON-Lines pair
/// manifest in input order. `pseudo_gt` paths are relative to `out_dir`.
pub fn emit_training_manifest(
    items: &[(ManifestRecord, Option<ArtifactMask>)],
    out_dir: impl AsRef<Path>,
    exec: Execution,
) -> Result<TrainingSet> {
    let out_dir = out_dir.as_ref();
    if let Some((rec, _)) = items.iter().find(|(_, m)| m.is_none()) {
        return Err(Error::MissingMask(rec.id.clone()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::Write {
        path: out_dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let results = map_ordered(items, exec, |(rec, mask)| {
        build_one(rec, mask.as_ref().expect("checked above"), out_dir).map_err(|e| e.in_record(&rec.id))
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let manifest_path = out_dir.join(TRAINING_MANIFEST);
    let mut text = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut text, r)?;
        text.push(b'\n');
    }
    fs::write(&manifest_path, &text).map_err(|e| Error::Write {
        path: manifest_path.clone(),
        reason: e.to_string(),
    })?;
    let missing_lr = records.iter().filter(|r| r.lr_path.is_none()).count();
    if missing_lr > 0 {
        log::warn!("{missing_lr} record(s) have no low-resolution input; their lr field is null");
    }
    Ok(TrainingSet {
        records,
        manifest_path,
        missing_lr,
    })
}
