//! Synthetic records written to disk for the CLI tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use desra_core::image_io::{save_label_map, save_mask, save_rgb};
use desra_core::{AdjustmentTable, ArtifactMask, BitDepth, LabelMap, RgbImage, NUM_CLASSES};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const SKY: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn mask(&self, width: usize, height: usize) -> ArtifactMask {
        ArtifactMask::from_fn(width, height, |x, y| self.contains(x, y))
    }
}

/// Horizontal ramp from 0.3 to 0.7, gray.
pub fn gradient(width: usize, height: usize) -> RgbImage {
    RgbImage::from_fn(width, height, BitDepth::Eight, |x, _| {
        let v = 0.3 + 0.4 * x as f64 / (width - 1) as f64;
        [v; 3]
    })
    .unwrap()
}

/// `base` plus uniform noise in `[-amp, amp]` inside `rect`.
pub fn add_noise(base: &RgbImage, rect: Rect, amp: f64, seed: u64) -> RgbImage {
    let mut rng = StdRng::seed_from_u64(seed);
    RgbImage::from_fn(base.width(), base.height(), base.bit_depth(), |x, y| {
        let px = base.pixel(x, y);
        if rect.contains(x, y) {
            let n = rng.gen_range(-amp..=amp);
            px.map(|v| v + n)
        } else {
            px
        }
    })
    .unwrap()
}

/// Binary texture inside `rect`: GAN gets `{0, 1}`, MSE the same pattern in `{0.2, 0.8}`.
pub fn add_shared_texture(gan: &RgbImage, mse: &RgbImage, rect: Rect, seed: u64) -> (RgbImage, RgbImage) {
    let mut rng = StdRng::seed_from_u64(seed);
    let pattern: Vec<bool> = (0..rect.w * rect.h).map(|_| rng.gen_bool(0.5)).collect();
    let at = |x: usize, y: usize| pattern[(y - rect.y) * rect.w + (x - rect.x)];
    let g = RgbImage::from_fn(gan.width(), gan.height(), gan.bit_depth(), |x, y| {
        if rect.contains(x, y) {
            [if at(x, y) { 1.0 } else { 0.0 }; 3]
        } else {
            gan.pixel(x, y)
        }
    })
    .unwrap();
    let m = RgbImage::from_fn(mse.width(), mse.height(), mse.bit_depth(), |x, y| {
        if rect.contains(x, y) {
            [if at(x, y) { 0.8 } else { 0.2 }; 3]
        } else {
            mse.pixel(x, y)
        }
    })
    .unwrap();
    (g, m)
}

/// One record on disk.
pub struct Fixture {
    pub id: String,
    pub mse: RgbImage,
    pub gan: RgbImage,
    pub labels: LabelMap,
    pub gt: Option<ArtifactMask>,
}

impl Fixture {
    /// Gradient MSE with a noised rectangle in the GAN image; GT is the rectangle.
    pub fn noised(id: &str, width: usize, height: usize, rect: Rect, seed: u64) -> Self {
        let mse = gradient(width, height);
        let gan = add_noise(&mse, rect, 0.3, seed);
        Fixture {
            id: id.into(),
            mse,
            gan,
            labels: LabelMap::uniform(width, height, SKY).unwrap(),
            gt: Some(rect.mask(width, height)),
        }
    }

    /// Writes the rasters into `dir` and returns the manifest line.
    pub fn write(&self, dir: &Path) -> String {
        let mse = format!("{}_mse.png", self.id);
        let gan = format!("{}_gan.png", self.id);
        let label = format!("{}_label.png", self.id);
        save_rgb(&self.mse, dir.join(&mse)).unwrap();
        save_rgb(&self.gan, dir.join(&gan)).unwrap();
        save_label_map(&self.labels, dir.join(&label)).unwrap();
        let mut line = serde_json::json!({"id": self.id, "mse": mse, "gan": gan, "label": label});
        if let Some(gt) = &self.gt {
            let name = format!("{}_gt.png", self.id);
            save_mask(gt, dir.join(&name)).unwrap();
            line["gt_mask"] = name.into();
        }
        line.to_string()
    }
}

/// Writes all fixtures plus `manifest.jsonl`; returns the manifest path.
pub fn write_manifest(dir: &Path, fixtures: &[Fixture]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let lines: Vec<String> = fixtures.iter().map(|f| f.write(dir)).collect();
    let path = dir.join("manifest.jsonl");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

pub fn uniform_weights(path: &Path) -> PathBuf {
    AdjustmentTable::uniform(NUM_CLASSES).save(path).unwrap();
    path.to_path_buf()
}

pub fn desra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_desra"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("failed to launch desra")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
