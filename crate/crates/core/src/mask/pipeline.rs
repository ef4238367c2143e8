//! From image pair to final artifact mask.

use crate::calibration::AdjustmentTable;
use crate::config::{DetectionConfig, HoleFill, Variant};
use crate::error::{check_dims, Error, Result};
use crate::exec::Execution;
use crate::image_io::{to_luma, ArtifactMask, LabelMap, RgbImage};
use crate::local_stats::{
    local_sigma_with, normalized_abs_similarity, texture_similarity, unstabilized_similarity, DistanceMap, MapKind,
};

use super::components::{connected_components, remove_small, RegionSet};
use super::morphology::{close, dilate, erode, fill_holes};

/// Marks pixels with `D / A_k < threshold`.
///
/// The stored polarity is 1 = artifact, the inverse of the 0/1 map in the
/// original formulation; every consumer in this crate uses this polarity.
pub fn binarize(
    d_map: &DistanceMap,
    labels: &LabelMap,
    weights: &AdjustmentTable,
    threshold: f64,
) -> Result<ArtifactMask> {
    check_dims(d_map.dims(), labels.dims())?;
    if d_map.kind() != MapKind::SimilarityD {
        return Err(Error::WrongMapKind {
            expected: MapKind::SimilarityD.name(),
            actual: d_map.kind().name(),
        });
    }
    let mut bits = Vec::with_capacity(d_map.values().len());
    for (&d, &k) in d_map.values().iter().zip(labels.classes()) {
        if k as usize >= weights.classes() {
            return Err(Error::ClassCountMismatch(k as usize + 1, weights.classes()));
        }
        bits.push(d / weights.weight(k) < threshold);
    }
    ArtifactMask::new(d_map.width(), d_map.height(), bits)
}

/// The map the configured variant thresholds, on the similarity scale
/// (low = divergent texture). GAN-SR is `x`, MSE-SR is `y`.
pub fn similarity_map(mse: &RgbImage, gan: &RgbImage, cfg: &DetectionConfig, exec: Execution) -> Result<DistanceMap> {
    check_dims(mse.dims(), gan.dims())?;
    let sx = local_sigma_with(&to_luma(gan), cfg.window, exec)?;
    let sy = local_sigma_with(&to_luma(mse), cfg.window, exec)?;
    match cfg.variant {
        Variant::Full | Variant::NoSemantics => texture_similarity(&sx, &sy, cfg.c, cfg.sigma_floor),
        Variant::NoNormalize => unstabilized_similarity(&sx, &sy, cfg.sigma_floor),
        Variant::AbsD => normalized_abs_similarity(&sx, &sy),
    }
}

/// Binarizes `d_map` with the variant's weights (uniform for `no_semantics`).
pub fn raw_mask(
    d_map: &DistanceMap,
    labels: &LabelMap,
    weights: &AdjustmentTable,
    cfg: &DetectionConfig,
) -> Result<ArtifactMask> {
    if cfg.variant == Variant::NoSemantics {
        binarize(d_map, labels, &AdjustmentTable::uniform(weights.classes()), cfg.threshold)
    } else {
        binarize(d_map, labels, weights, cfg.threshold)
    }
}

/// Erosion, dilation, hole filling and small-region removal, in that order.
pub fn postprocess(raw: &ArtifactMask, cfg: &DetectionConfig) -> ArtifactMask {
    let eroded = erode(raw, cfg.erosion_se);
    let dilated = dilate(&eroded, cfg.dilation_se);
    let filled = match cfg.hole_fill {
        HoleFill::FloodFill => fill_holes(&dilated, cfg.fill_connectivity),
        HoleFill::Closing => close(&dilated, cfg.hole_se),
    };
    remove_small(&filled, cfg.min_area, cfg.component_connectivity)
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub raw: ArtifactMask,
    pub mask: ArtifactMask,
    pub regions: RegionSet,
}

impl Detection {
    pub fn artifact_fraction(&self) -> f64 {
        let total = self.mask.bits().len();
        if total == 0 {
            0.0
        } else {
            self.mask.popcount() as f64 / total as f64
        }
    }
}

/// Full pipeline, keeping the raw binarization and the final regions.
pub fn detect_full(
    mse: &RgbImage,
    gan: &RgbImage,
    labels: &LabelMap,
    weights: &AdjustmentTable,
    cfg: &DetectionConfig,
    exec: Execution,
) -> Result<Detection> {
    cfg.validate()?;
    check_dims(mse.dims(), labels.dims())?;
    let d_map = similarity_map(mse, gan, cfg, exec)?;
    finish_detection(&d_map, labels, weights, cfg)
}

/// Threshold-dependent tail of the pipeline, reusable across a sweep.
pub fn finish_detection(
    d_map: &DistanceMap,
    labels: &LabelMap,
    weights: &AdjustmentTable,
    cfg: &DetectionConfig,
) -> Result<Detection> {
    let raw = raw_mask(d_map, labels, weights, cfg)?;
    let mask = postprocess(&raw, cfg);
    let regions = connected_components(&mask, cfg.component_connectivity);
    Ok(Detection { raw, mask, regions })
}

pub fn detect(
    mse: &RgbImage,
    gan: &RgbImage,
    labels: &LabelMap,
    weights: &AdjustmentTable,
    cfg: &DetectionConfig,
) -> Result<ArtifactMask> {
    Ok(detect_full(mse, gan, labels, weights, cfg, Execution::default())?.mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::AdjustmentTable;
    use crate::image_io::{BitDepth, NUM_CLASSES};

    fn table_with(class: u8, weight: f64) -> AdjustmentTable {
        let mut t = AdjustmentTable::uniform(NUM_CLASSES);
        t.weights[class as usize] = weight;
        t
    }

    fn d(values: Vec<f64>) -> DistanceMap {
        let n = values.len();
        DistanceMap::new(n, 1, values, MapKind::SimilarityD).unwrap()
    }

    #[test]
    fn binarize_with_building_weight() {
        let building = 1u8;
        let t = table_with(building, 0.8);
        let labels = LabelMap::uniform(2, 1, building).unwrap();
        let m = binarize(&d(vec![0.5, 0.6]), &labels, &t, 0.7).unwrap();
        // 0.5 / 0.8 = 0.625 < 0.7; 0.6 / 0.8 = 0.75 ≥ 0.7.
        assert_eq!(m.bits(), &[true, false]);
    }

    #[test]
    fn binarize_exact_tie_is_not_artifact() {
        let t = AdjustmentTable::uniform(NUM_CLASSES);
        let labels = LabelMap::uniform(1, 1, 0).unwrap();
        assert_eq!(binarize(&d(vec![0.7]), &labels, &t, 0.7).unwrap().bits(), &[false]);
        assert_eq!(binarize(&d(vec![0.69999]), &labels, &t, 0.7).unwrap().bits(), &[true]);
    }

    #[test]
    fn binarize_rejects_bad_inputs() {
        let t = AdjustmentTable::uniform(NUM_CLASSES);
        let labels = LabelMap::uniform(2, 1, 0).unwrap();
        assert!(matches!(binarize(&d(vec![0.5]), &labels, &t, 0.7), Err(Error::DimensionMismatch { .. })));
        let abs = DistanceMap::new(2, 1, vec![0.5, 0.5], MapKind::AbsD).unwrap();
        assert!(matches!(binarize(&abs, &labels, &t, 0.7), Err(Error::WrongMapKind { .. })));
    }

    #[test]
    fn identical_textured_images_give_empty_mask() {
        let mut s = 17u64;
        let img = RgbImage::from_fn(64, 48, BitDepth::Eight, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let v = (s >> 40) as f64 / (1u64 << 24) as f64;
            [v, v, v]
        })
        .unwrap();
        let labels = LabelMap::uniform(64, 48, 0).unwrap();
        let t = AdjustmentTable::uniform(NUM_CLASSES);
        for variant in Variant::ALL {
            let cfg = DetectionConfig::default().with_variant(variant);
            assert!(detect(&img, &img, &labels, &t, &cfg).unwrap().is_empty(), "{variant}");
        }
    }

    #[test]
    fn postprocess_order_properties() {
        let cfg = DetectionConfig {
            min_area: 20,
            ..DetectionConfig::default()
        };
        let raw = ArtifactMask::from_fn(40, 40, |x, y| (5..25).contains(&x) && (5..25).contains(&y) && !(x == 15 && y == 15));
        let eroded = erode(&raw, cfg.erosion_se);
        assert!(eroded.popcount() <= raw.popcount());
        let out = postprocess(&raw, &cfg);
        assert!(out.get(15, 15));
        assert_eq!(out.popcount(), 400);
    }
}
