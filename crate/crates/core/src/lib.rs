//! Detection of GAN-inference artifacts in super-resolution output.
//!
//! A GAN-SR result is compared against an MSE-SR result of the same input
//! through local standard-deviation maps. Their stabilized similarity, scaled
//! by per-class weights calibrated on a corpus, is thresholded into a mask
//! and cleaned with morphology. Masks drive pseudo ground-truth compositing
//! for fine-tuning and are scored with IoU and region-level precision and
//! recall.
//!
//! The `parallel` feature (default) runs row loops and batch maps on rayon;
//! see [`exec`].

pub mod calibration;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod image_io;
pub mod local_stats;
pub mod mask;
pub mod pseudo_gt;

pub use calibration::{AdjustmentTable, ClassAccumulator};
pub use config::{Connectivity, DetectionConfig, HoleFill, Variant};
pub use error::{Error, Result};
pub use exec::Execution;
pub use image_io::{ArtifactMask, BitDepth, ImagePlane, LabelMap, ManifestRecord, RgbImage, NUM_CLASSES};
pub use local_stats::{DistanceMap, MapKind, SigmaMap};
pub use mask::{Detection, RegionSet};
