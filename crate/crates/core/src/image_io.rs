//! Rasters and their on-disk formats.
//!
//! Images are PNG (8 or 16 bit, gray or RGB) normalized to `[0, 1]`. Label
//! maps and masks are 8-bit single-channel PNGs; masks hold only 0 and 255.
//! Batches are described by a JSON-Lines manifest whose paths resolve
//! relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ExtendedColorType, ImageFormat, ImageReader};
use serde::Deserialize;

use crate::error::{check_dims, Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Number of semantic classes in the label taxonomy (ADE20K).
pub const NUM_CLASSES: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Three-channel image with interleaved RGB samples in `[0, 1]`.
///
/// `bit_depth` remembers the source precision so derived images can be
/// written back without silent precision loss.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    samples: Vec<f64>,
    bit_depth: BitDepth,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, samples: Vec<f64>, bit_depth: BitDepth) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("image dimensions must be at least 1×1".into()));
        }
        if samples.len() != width * height * 3 {
            return Err(Error::InvalidConfig(format!(
                "expected {} samples for a {width}×{height} RGB image, got {}",
                width * height * 3,
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!("sample {bad} outside [0, 1]")));
        }
        Ok(RgbImage {
            width,
            height,
            samples,
            bit_depth,
        })
    }

    /// Builds an image by evaluating `f(x, y) -> [r, g, b]`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                samples.extend(f(x, y).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(width, height, samples, bit_depth)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }

    /// Same pixels tagged with a different output precision.
    pub fn with_bit_depth(mut self, bit_depth: BitDepth) -> Self {
        self.bit_depth = bit_depth;
        self
    }

    /// Integer samples at the image's own bit depth.
    pub fn quantized(&self) -> Vec<u16> {
        let max = self.bit_depth.max_value();
        self.samples.iter().map(|v| (v * max).round() as u16).collect()
    }
}

/// Single-channel plane with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} samples for a {width}×{height} plane, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite sample {bad}")));
        }
        Ok(ImagePlane { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        ImagePlane { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Per-pixel class indices, each below [`NUM_CLASSES`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    classes: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, classes: Vec<u8>) -> Result<Self> {
        if classes.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} labels for a {width}×{height} map, got {}",
                width * height,
                classes.len()
            )));
        }
        if let Some(i) = classes.iter().position(|&c| c as usize >= NUM_CLASSES) {
            return Err(Error::ClassOutOfRange {
                value: classes[i] as u32,
                x: i % width.max(1),
                y: i / width.max(1),
                classes: NUM_CLASSES,
            });
        }
        Ok(LabelMap {
            width,
            height,
            classes,
        })
    }

    pub fn uniform(width: usize, height: usize, class: u8) -> Result<Self> {
        Self::new(width, height, vec![class; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.classes[y * self.width + x]
    }
}

/// Binary mask; `true` marks an artifact pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArtifactMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ArtifactMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} bits for a {width}×{height} mask, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(ArtifactMask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        ArtifactMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        ArtifactMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        ArtifactMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &ArtifactMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn intersection_count(&self, other: &ArtifactMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a && b).count()
    }

    pub fn union_count(&self, other: &ArtifactMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a || b).count()
    }
}

/// One line of a batch manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub id: String,
    pub mse_path: PathBuf,
    pub gan_path: PathBuf,
    pub label_path: PathBuf,
    pub gt_mask_path: Option<PathBuf>,
    pub lr_path: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    mse: PathBuf,
    gan: PathBuf,
    label: PathBuf,
    #[serde(default)]
    gt_mask: Option<PathBuf>,
    #[serde(default)]
    lr: Option<PathBuf>,
}

/// Images of one record, loaded and checked for matching dimensions.
#[derive(Debug, Clone)]
pub struct LoadedRecord {
    pub mse: RgbImage,
    pub gan: RgbImage,
    pub labels: LabelMap,
    pub gt_mask: Option<ArtifactMask>,
}

fn open_png(path: &Path) -> Result<DynamicImage> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut magic = [0u8; 8];
    let n = fs::File::open(path)?.read(&mut magic)?;
    if n < PNG_SIGNATURE.len() || magic != PNG_SIGNATURE {
        let reason = match image::guess_format(&magic[..n]) {
            Ok(f) => format!("{f:?} is not PNG"),
            Err(_) => "missing PNG signature".into(),
        };
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason,
        });
    }
    let mut reader = ImageReader::open(path)?;
    reader.set_format(ImageFormat::Png);
    reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        other => Error::CorruptData {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })
}

fn unsupported(path: &Path, what: &str, img: &DynamicImage) -> Error {
    Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: format!("{what}, found {:?}", img.color()),
    }
}

/// Loads an 8- or 16-bit gray or RGB PNG; gray is replicated to three channels.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = open_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (samples, depth): (Vec<f64>, BitDepth) = match &img {
        DynamicImage::ImageLuma8(buf) => (
            buf.as_raw().iter().flat_map(|&v| [v as f64 / 255.0; 3]).collect(),
            BitDepth::Eight,
        ),
        DynamicImage::ImageRgb8(buf) => (
            buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
            BitDepth::Eight,
        ),
        DynamicImage::ImageLuma16(buf) => (
            buf.as_raw().iter().flat_map(|&v| [v as f64 / 65535.0; 3]).collect(),
            BitDepth::Sixteen,
        ),
        DynamicImage::ImageRgb16(buf) => (
            buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
            BitDepth::Sixteen,
        ),
        other => return Err(unsupported(path, "expected 1 or 3 channels without alpha", other)),
    };
    RgbImage::new(w, h, samples, depth).map_err(|e| Error::CorruptData {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes an RGB PNG at the image's bit depth.
pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let q = img.quantized();
    match img.bit_depth() {
        BitDepth::Eight => {
            let bytes: Vec<u8> = q.iter().map(|&v| v as u8).collect();
            write_png(path, &bytes, img.width, img.height, ExtendedColorType::Rgb8)
        }
        BitDepth::Sixteen => {
            let bytes: Vec<u8> = q.iter().flat_map(|v| v.to_ne_bytes()).collect();
            write_png(path, &bytes, img.width, img.height, ExtendedColorType::Rgb16)
        }
    }
}

fn write_png(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, ImageFormat::Png).map_err(|e| {
        Error::Write {
            path: path.to_path_buf(),
            reason: e.to_string(),
        }
    })
}

/// BT.601 luma.
pub fn to_luma(img: &RgbImage) -> ImagePlane {
    let data = img
        .samples
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    ImagePlane {
        width: img.width,
        height: img.height,
        data,
    }
}

fn load_gray8(path: &Path, what: &str) -> Result<(usize, usize, Vec<u8>)> {
    let img = open_png(path)?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            Ok((w, h, buf.into_raw()))
        }
        other => Err(unsupported(path, what, &other)),
    }
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let (w, h, raw) = load_gray8(path.as_ref(), "label maps must be 8-bit single-channel")?;
    LabelMap::new(w, h, raw)
}

pub fn save_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        &labels.classes,
        labels.width,
        labels.height,
        ExtendedColorType::L8,
    )
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<ArtifactMask> {
    let (w, h, raw) = load_gray8(path.as_ref(), "masks must be 8-bit single-channel")?;
    let mut bits = Vec::with_capacity(raw.len());
    for (i, &v) in raw.iter().enumerate() {
        match v {
            0 => bits.push(false),
            255 => bits.push(true),
            other => {
                return Err(Error::NonBinaryValue {
                    value: other as u32,
                    x: i % w,
                    y: i / w,
                })
            }
        }
    }
    ArtifactMask::new(w, h, bits)
}

pub fn save_mask(mask: &ArtifactMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(path.as_ref(), &bytes, mask.width, mask.height, ExtendedColorType::L8)
}

/// Writes a `[0, 1]`-valued plane as 16-bit gray, `round(65535 · clamp(v, 0, 1))`.
pub fn save_plane16(width: usize, height: usize, values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (65535.0 * v.clamp(0.0, 1.0)).round() as u16)
        .flat_map(|v| v.to_ne_bytes())
        .collect();
    write_png(path.as_ref(), &bytes, width, height, ExtendedColorType::L16)
}

/// Parses JSON-Lines manifest text; relative paths are joined onto `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestRecord>> {
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        records.push(ManifestRecord {
            id: raw.id,
            mse_path: resolve(raw.mse),
            gan_path: resolve(raw.gan),
            label_path: resolve(raw.label),
            gt_mask_path: raw.gt_mask.map(resolve),
            lr_path: raw.lr.map(resolve),
        });
    }
    Ok(records)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

impl ManifestRecord {
    /// Loads every raster of the record and checks that they share one size.
    pub fn load(&self) -> Result<LoadedRecord> {
        let mse = load_rgb(&self.mse_path)?;
        let gan = load_rgb(&self.gan_path)?;
        check_dims(mse.dims(), gan.dims())?;
        let labels = load_label_map(&self.label_path)?;
        check_dims(mse.dims(), labels.dims())?;
        let gt_mask = match &self.gt_mask_path {
            Some(p) => {
                let m = load_mask(p)?;
                check_dims(mse.dims(), m.dims())?;
                Some(m)
            }
            None => None,
        };
        Ok(LoadedRecord {
            mse,
            gan,
            labels,
            gt_mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_gray8(path: &Path, w: u32, h: u32, data: &[u8]) {
        image::save_buffer(path, data, w, h, ExtendedColorType::L8).unwrap();
    }

    #[test]
    fn eight_bit_extremes_normalize() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        image::save_buffer(&p, &[255, 0, 255, 0, 0, 0], 2, 1, ExtendedColorType::Rgb8).unwrap();
        let img = load_rgb(&p).unwrap();
        assert_eq!(img.bit_depth(), BitDepth::Eight);
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 1.0]);
        assert_eq!(img.pixel(1, 0), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn sixteen_bit_midpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let bytes: Vec<u8> = [32768u16].iter().flat_map(|v| v.to_ne_bytes()).collect();
        image::save_buffer(&p, &bytes, 1, 1, ExtendedColorType::L16).unwrap();
        let img = load_rgb(&p).unwrap();
        assert_eq!(img.bit_depth(), BitDepth::Sixteen);
        let expected = 32768.0 / 65535.0;
        assert_eq!(img.pixel(0, 0), [expected; 3]);
        assert!((expected - 0.500008).abs() < 1e-6);
    }

    #[test]
    fn rgb16_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = RgbImage::from_fn(3, 2, BitDepth::Sixteen, |x, y| {
            [x as f64 / 2.0, y as f64, 12345.0 / 65535.0]
        })
        .unwrap();
        save_rgb(&img, &p).unwrap();
        let back = load_rgb(&p).unwrap();
        assert_eq!(back.quantized(), img.quantized());
        assert_eq!(back.bit_depth(), BitDepth::Sixteen);
    }

    #[test]
    fn missing_and_unsupported_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_rgb(dir.path().join("nope.png")), Err(Error::MissingFile(_))));
        let txt = dir.path().join("x.png");
        fs::write(&txt, b"not an image at all").unwrap();
        assert!(matches!(load_rgb(&txt), Err(Error::UnsupportedFormat { .. })));
        let rgba = dir.path().join("rgba.png");
        image::save_buffer(&rgba, &[1, 2, 3, 4], 1, 1, ExtendedColorType::Rgba8).unwrap();
        assert!(matches!(load_rgb(&rgba), Err(Error::UnsupportedFormat { .. })));
    }

    #[test]
    fn truncated_png_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        write_gray8(&p, 8, 8, &[7; 64]);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_rgb(&p), Err(Error::CorruptData { .. })));
    }

    #[test]
    fn luma_weights() {
        let img = RgbImage::new(3, 1, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], BitDepth::Eight).unwrap();
        let l = to_luma(&img);
        assert!((l.get(0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(l.get(1, 0), 0.0);
        assert!((l.get(2, 0) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn label_map_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let zeros = dir.path().join("z.png");
        write_gray8(&zeros, 2, 2, &[0; 4]);
        assert!(load_label_map(&zeros).unwrap().classes().iter().all(|&c| c == 0));

        let ok = dir.path().join("ok.png");
        write_gray8(&ok, 2, 1, &[149, 3]);
        assert_eq!(load_label_map(&ok).unwrap().get(0, 0), 149);

        let bad = dir.path().join("bad.png");
        write_gray8(&bad, 2, 1, &[3, 150]);
        match load_label_map(&bad) {
            Err(Error::ClassOutOfRange { value: 150, x: 1, y: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mask_codec() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        write_gray8(&p, 2, 1, &[255, 0]);
        let m = load_mask(&p).unwrap();
        assert_eq!(m.bits(), &[true, false]);

        write_gray8(&p, 2, 1, &[255, 17]);
        assert!(matches!(load_mask(&p), Err(Error::NonBinaryValue { value: 17, x: 1, y: 0 })));
    }

    #[test]
    fn manifest_parsing() {
        let base = Path::new("/data");
        let one = r#"{"id":"a","mse":"a_m.png","gan":"a_g.png","label":"a_s.png"}"#;
        let recs = parse_manifest(one, base).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].mse_path, PathBuf::from("/data/a_m.png"));
        assert_eq!(recs[0].gt_mask_path, None);

        assert!(parse_manifest("", base).unwrap().is_empty());

        let dup = format!("{one}\n{one}\n");
        assert!(matches!(parse_manifest(&dup, base), Err(Error::DuplicateId(id)) if id == "a"));

        let broken = format!("{one}\n{{\"id\": 3}}\n");
        assert!(matches!(parse_manifest(&broken, base), Err(Error::Parse { line: 2, .. })));

        let abs = r#"{"id":"b","mse":"/x/m.png","gan":"g.png","label":"s.png","gt_mask":"gt.png","lr":null}"#;
        let recs = parse_manifest(abs, base).unwrap();
        assert_eq!(recs[0].mse_path, PathBuf::from("/x/m.png"));
        assert_eq!(recs[0].gt_mask_path, Some(PathBuf::from("/data/gt.png")));
        assert_eq!(recs[0].lr_path, None);
    }

    #[test]
    fn record_dimension_check() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        image::save_buffer(d.join("m.png"), &[0; 12], 2, 2, ExtendedColorType::Rgb8).unwrap();
        image::save_buffer(d.join("g.png"), &[0; 18], 3, 2, ExtendedColorType::Rgb8).unwrap();
        write_gray8(&d.join("s.png"), 2, 2, &[0; 4]);
        let rec = ManifestRecord {
            id: "r".into(),
            mse_path: d.join("m.png"),
            gan_path: d.join("g.png"),
            label_path: d.join("s.png"),
            gt_mask_path: None,
            lr_path: None,
        };
        assert!(matches!(rec.load(), Err(Error::DimensionMismatch { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn mask_round_trip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
                let mut s = seed;
                let mask = ArtifactMask::from_fn(w, h, |_, _| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    s >> 63 == 1
                });
                let dir = tempfile::tempdir().unwrap();
                let p = dir.path().join("m.png");
                save_mask(&mask, &p).unwrap();
                prop_assert_eq!(load_mask(&p).unwrap(), mask);
            }

            #[test]
            fn luma_within_channel_range(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
                let img = RgbImage::new(1, 1, vec![r, g, b], BitDepth::Eight).unwrap();
                let l = to_luma(&img).get(0, 0);
                let lo = r.min(g).min(b);
                let hi = r.max(g).max(b);
                prop_assert!(l >= lo - 1e-12 && l <= hi + 1e-12);
            }
        }
    }
}
