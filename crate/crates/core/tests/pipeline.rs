use std::fs;

use desra_core::calibration::{calibrate_records, DEFAULT_PERCENTILE};
use desra_core::image_io::{
    load_label_map, load_mask, load_rgb, save_label_map, save_mask, save_rgb, to_luma, ManifestRecord,
};
use desra_core::local_stats::local_sigma_with;
use desra_core::mask::detect_full;
use desra_core::{AdjustmentTable, ArtifactMask, BitDepth, DetectionConfig, Error, LabelMap, RgbImage, NUM_CLASSES};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SKY: u8 = 2;
const TREE: u8 = 4;

fn noisy(w: usize, h: usize, seed: u64, depth: BitDepth) -> RgbImage {
    let mut rng = StdRng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, depth, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap()
}

/// Left half sky (identical smooth ramp in both images), right half tree
/// (GAN carries extra texture everywhere).
fn scene(w: usize, h: usize, seed: u64) -> (RgbImage, RgbImage, LabelMap) {
    let mut rng = StdRng::seed_from_u64(seed);
    let ramp = |x: usize, y: usize| 0.3 + 0.3 * (x + y) as f64 / (w + h) as f64;
    let mse = RgbImage::from_fn(w, h, BitDepth::Eight, |x, y| [ramp(x, y); 3]).unwrap();
    let gan = RgbImage::from_fn(w, h, BitDepth::Eight, |x, y| {
        let v = ramp(x, y);
        if x >= w / 2 {
            [v + rng.gen_range(-0.1..0.1); 3]
        } else {
            [v; 3]
        }
    })
    .unwrap();
    let labels = LabelMap::new(w, h, (0..w * h).map(|i| if i % w >= w / 2 { TREE } else { SKY }).collect()).unwrap();
    (mse, gan, labels)
}

fn write_scene(dir: &std::path::Path, id: &str, seed: u64) -> ManifestRecord {
    let (mse, gan, labels) = scene(96, 64, seed);
    let rec = ManifestRecord {
        id: id.into(),
        mse_path: dir.join(format!("{id}_mse.png")),
        gan_path: dir.join(format!("{id}_gan.png")),
        label_path: dir.join(format!("{id}_label.png")),
        gt_mask_path: None,
        lr_path: None,
    };
    save_rgb(&mse, &rec.mse_path).unwrap();
    save_rgb(&gan, &rec.gan_path).unwrap();
    save_label_map(&labels, &rec.label_path).unwrap();
    rec
}

#[test]
fn png_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (depth, name) in [(BitDepth::Eight, "e.png"), (BitDepth::Sixteen, "s.png")] {
        let img = noisy(17, 9, 3, depth);
        let quantized = RgbImage::new(
            17,
            9,
            img.quantized().iter().map(|&q| q as f64 / depth.max_value()).collect(),
            depth,
        )
        .unwrap();
        save_rgb(&img, dir.path().join(name)).unwrap();
        let back = load_rgb(dir.path().join(name)).unwrap();
        assert_eq!(back, quantized);
        assert_eq!(back.bit_depth(), depth);
    }

    let labels = LabelMap::new(5, 2, (0..10).map(|i| (i * 14) as u8).collect()).unwrap();
    save_label_map(&labels, dir.path().join("l.png")).unwrap();
    assert_eq!(load_label_map(dir.path().join("l.png")).unwrap(), labels);

    let mask = ArtifactMask::from_fn(7, 5, |x, y| (x ^ y) & 1 == 0);
    save_mask(&mask, dir.path().join("m.png")).unwrap();
    assert_eq!(load_mask(dir.path().join("m.png")).unwrap(), mask);
}

#[test]
fn invalid_rasters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let gray = |name: &str, v: u8| {
        let path = dir.path().join(name);
        image::GrayImage::from_pixel(4, 3, image::Luma([v])).save(&path).unwrap();
        path
    };
    assert!(matches!(
        load_label_map(gray("l.png", 151)),
        Err(Error::ClassOutOfRange { value: 151, .. })
    ));
    assert!(matches!(load_mask(gray("m.png", 7)), Err(Error::NonBinaryValue { value: 7, .. })));
    let rgba = dir.path().join("a.png");
    image::RgbaImage::from_pixel(2, 2, image::Rgba([1, 2, 3, 4])).save(&rgba).unwrap();
    assert!(matches!(load_rgb(&rgba), Err(Error::UnsupportedFormat { .. })));
    let truncated = dir.path().join("t.png");
    let bytes = fs::read(gray("ok.png", 0)).unwrap();
    fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_rgb(&truncated), Err(Error::CorruptData { .. })));
    assert!(matches!(load_rgb(dir.path().join("none.png")), Err(Error::MissingFile(_))));
}

#[test]
fn strategies_agree_bitwise() {
    use desra_core::Execution::{Parallel, Sequential};

    let img = noisy(301, 177, 9, BitDepth::Eight);
    let plane = to_luma(&img);
    let a = local_sigma_with(&plane, 11, Sequential).unwrap();
    let b = local_sigma_with(&plane, 11, Parallel).unwrap();
    assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let (mse, gan, labels) = scene(120, 80, 4);
    let weights = AdjustmentTable::uniform(NUM_CLASSES);
    let cfg = DetectionConfig::default();
    let s = detect_full(&mse, &gan, &labels, &weights, &cfg, Sequential).unwrap();
    let p = detect_full(&mse, &gan, &labels, &weights, &cfg, Parallel).unwrap();
    assert_eq!(s.raw, p.raw);
    assert_eq!(s.mask, p.mask);
    assert_eq!(s.regions, p.regions);

    let dir = tempfile::tempdir().unwrap();
    let records: Vec<_> = (0..4).map(|i| write_scene(dir.path(), &format!("s{i}"), i)).collect();
    let seq = calibrate_records(&records, &cfg, DEFAULT_PERCENTILE, false, "t", Sequential).unwrap();
    let par = calibrate_records(&records, &cfg, DEFAULT_PERCENTILE, false, "t", Parallel).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn calibration_spares_textured_classes() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<_> = (0..3).map(|i| write_scene(dir.path(), &format!("c{i}"), 10 + i)).collect();
    let cfg = DetectionConfig::default();
    let table = calibrate_records(&records, &cfg, DEFAULT_PERCENTILE, false, "scenes", Default::default()).unwrap();
    assert!(table.weight(SKY) > 0.99, "sky weight {}", table.weight(SKY));
    assert!(table.seen[TREE as usize] && table.seen[SKY as usize]);
    assert!(!table.seen[0]);
    let tree = table.weight(TREE);
    assert!(tree < 0.7, "tree weight {tree}");
    assert_eq!(table.config.as_ref(), Some(&cfg));

    let path = dir.path().join("w.json");
    table.save(&path).unwrap();
    assert_eq!(AdjustmentTable::load(&path).unwrap(), table);

    // The same divergence is flagged without weights and tolerated with them.
    let (mse, gan, labels) = scene(96, 64, 99);
    let tree_px = ArtifactMask::from_fn(96, 64, |x, _| x >= 48);
    let plain = detect_full(&mse, &gan, &labels, &AdjustmentTable::uniform(NUM_CLASSES), &cfg, Default::default())
        .unwrap();
    let weighted = detect_full(&mse, &gan, &labels, &table, &cfg, Default::default()).unwrap();
    assert!(plain.mask.intersection_count(&tree_px) > 1000);
    assert!(weighted.mask.intersection_count(&tree_px) < plain.mask.intersection_count(&tree_px) / 4);
}

#[test]
fn histogram_calibration_tracks_exact() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<_> = (0..2).map(|i| write_scene(dir.path(), &format!("h{i}"), 20 + i)).collect();
    let cfg = DetectionConfig::default();
    let exact = calibrate_records(&records, &cfg, DEFAULT_PERCENTILE, false, "x", Default::default()).unwrap();
    let hist = calibrate_records(&records, &cfg, DEFAULT_PERCENTILE, true, "x", Default::default()).unwrap();
    for k in 0..NUM_CLASSES {
        assert_eq!(exact.seen[k], hist.seen[k]);
        assert!((exact.weights[k] - hist.weights[k]).abs() <= 1.0 / 4096.0, "class {k}");
    }
}

#[test]
fn calibration_names_failing_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut records: Vec<_> = (0..2).map(|i| write_scene(dir.path(), &format!("f{i}"), i)).collect();
    records[1].label_path = dir.path().join("missing.png");
    let err = calibrate_records(&records, &DetectionConfig::default(), 85.0, false, "x", Default::default());
    match err {
        Err(Error::Record { id, .. }) => assert_eq!(id, "f1"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        calibrate_records(&[], &DetectionConfig::default(), 85.0, false, "x", Default::default()),
        Err(Error::EmptyInput)
    ));
}
