//! Binarization, morphology and region extraction.

mod components;
mod morphology;
mod pipeline;

pub use components::{connected_components, remove_small, BoundingBox, Region, RegionSet};
pub use morphology::{close, dilate, erode, fill_holes};
pub use pipeline::{
    binarize, detect, detect_full, finish_detection, postprocess, raw_mask, similarity_map, Detection,
};
