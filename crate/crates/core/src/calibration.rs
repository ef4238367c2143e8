//! Per-class adjustment weights.
//!
//! Each class weight is the nearest-rank value at the given percentile of
//! that class's D values sorted in descending order, clamped to
//! `[WEIGHT_FLOOR, 1]`. Accumulators shard a corpus and merge, so a
//! parallel scan yields the same table as a single pass.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::DetectionConfig;
use crate::error::{check_dims, Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::image_io::{LabelMap, ManifestRecord, NUM_CLASSES};
use crate::local_stats::{DistanceMap, MapKind};
use crate::mask::similarity_map;

pub const DEFAULT_PERCENTILE: f64 = 85.0;
pub const WEIGHT_FLOOR: f64 = 0.05;
pub const HISTOGRAM_BINS: usize = 4096;
pub const WEIGHTS_SCHEMA: &str = "desra-weights/1";

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Exact(Vec<Vec<f64>>),
    Histogram(Vec<Vec<u64>>),
}

/// Observed D values per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAccumulator {
    storage: Storage,
}

fn histogram_bin(v: f64) -> usize {
    ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

/// 1-indexed nearest rank `ceil(percentile / 100 · n)`, clamped to `[1, n]`.
pub fn nearest_rank(percentile: f64, n: usize) -> usize {
    ((percentile * n as f64 / 100.0).ceil() as usize).clamp(1, n)
}

impl ClassAccumulator {
    /// Exact storage for `classes` classes.
    pub fn new(classes: usize) -> Self {
        ClassAccumulator {
            storage: Storage::Exact(vec![Vec::new(); classes]),
        }
    }

    /// Fixed-bin storage: memory is bounded, weights are quantized to bin
    /// centers (error at most `1 / HISTOGRAM_BINS`).
    pub fn histogram(classes: usize) -> Self {
        ClassAccumulator {
            storage: Storage::Histogram(vec![vec![0; HISTOGRAM_BINS]; classes]),
        }
    }

    pub fn classes(&self) -> usize {
        match &self.storage {
            Storage::Exact(v) => v.len(),
            Storage::Histogram(v) => v.len(),
        }
    }

    pub fn count(&self, class: usize) -> u64 {
        match &self.storage {
            Storage::Exact(v) => v[class].len() as u64,
            Storage::Histogram(v) => v[class].iter().sum(),
        }
    }

    pub fn total(&self) -> u64 {
        (0..self.classes()).map(|k| self.count(k)).sum()
    }

    /// Stored values of one class in insertion order (exact storage only).
    pub fn values(&self, class: usize) -> Option<&[f64]> {
        match &self.storage {
            Storage::Exact(v) => Some(&v[class]),
            Storage::Histogram(_) => None,
        }
    }

    /// Adds one observation. Values outside `[0, 1]` or classes beyond range are rejected.
    pub fn push(&mut self, class: usize, value: f64) -> Result<()> {
        if class >= self.classes() {
            return Err(Error::ClassOutOfRange {
                value: class as u32,
                x: 0,
                y: 0,
                classes: self.classes(),
            });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!("D value {value} outside [0, 1]")));
        }
        match &mut self.storage {
            Storage::Exact(v) => v[class].push(value),
            Storage::Histogram(v) => v[class][histogram_bin(value)] += 1,
        }
        Ok(())
    }

    /// Appends every pixel's D to its class.
    pub fn accumulate(&mut self, d_map: &DistanceMap, labels: &LabelMap) -> Result<()> {
        check_dims(d_map.dims(), labels.dims())?;
        if d_map.kind() != MapKind::SimilarityD {
            return Err(Error::WrongMapKind {
                expected: MapKind::SimilarityD.name(),
                actual: d_map.kind().name(),
            });
        }
        if let Some(&bad) = labels.classes().iter().find(|&&c| c as usize >= self.classes()) {
            return Err(Error::ClassCountMismatch(bad as usize + 1, self.classes()));
        }
        match &mut self.storage {
            Storage::Exact(v) => {
                for (&d, &k) in d_map.values().iter().zip(labels.classes()) {
                    v[k as usize].push(d);
                }
            }
            Storage::Histogram(v) => {
                for (&d, &k) in d_map.values().iter().zip(labels.classes()) {
                    v[k as usize][histogram_bin(d)] += 1;
                }
            }
        }
        Ok(())
    }

    /// Per-class multiset union.
    pub fn merge(mut self, other: ClassAccumulator) -> Result<ClassAccumulator> {
        if self.classes() != other.classes() {
            return Err(Error::ClassCountMismatch(self.classes(), other.classes()));
        }
        match (&mut self.storage, other.storage) {
            (Storage::Exact(a), Storage::Exact(b)) => {
                for (dst, src) in a.iter_mut().zip(b) {
                    dst.extend(src);
                }
            }
            (Storage::Histogram(a), Storage::Histogram(b)) => {
                for (dst, src) in a.iter_mut().zip(b) {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            _ => return Err(Error::StorageMismatch),
        }
        Ok(self)
    }

    /// Nearest-rank descending percentile of one class, before clamping.
    pub fn class_percentile(&self, class: usize, percentile: f64) -> Option<f64> {
        match &self.storage {
            Storage::Exact(v) => {
                let values = &v[class];
                if values.is_empty() {
                    return None;
                }
                let n = values.len();
                let rank = nearest_rank(percentile, n);
                let mut scratch = values.clone();
                // Descending rank r is ascending index n − r.
                let (_, v, _) = scratch.select_nth_unstable_by(n - rank, f64::total_cmp);
                Some(*v)
            }
            Storage::Histogram(v) => {
                let bins = &v[class];
                let n: u64 = bins.iter().sum();
                if n == 0 {
                    return None;
                }
                let rank = nearest_rank(percentile, n as usize) as u64;
                let mut seen = 0;
                for (b, &c) in bins.iter().enumerate().rev() {
                    seen += c;
                    if seen >= rank {
                        return Some((b as f64 + 0.5) / HISTOGRAM_BINS as f64);
                    }
                }
                unreachable!("rank never exceeds the observation count")
            }
        }
    }

    pub fn finalize(&self, percentile: f64) -> Result<AdjustmentTable> {
        if !(percentile > 0.0 && percentile < 100.0) {
            return Err(Error::InvalidConfig(format!("percentile {percentile} outside (0, 100)")));
        }
        let classes = self.classes();
        let mut weights = Vec::with_capacity(classes);
        let mut seen = Vec::with_capacity(classes);
        for k in 0..classes {
            match self.class_percentile(k, percentile) {
                Some(v) => {
                    weights.push(v.clamp(WEIGHT_FLOOR, 1.0));
                    seen.push(true);
                }
                None => {
                    weights.push(1.0);
                    seen.push(false);
                }
            }
        }
        Ok(AdjustmentTable {
            weights,
            percentile,
            c_used: 0.0,
            seen,
            corpus_id: String::new(),
            config: None,
        })
    }
}

/// Per-class weights `A_k` with calibration metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentTable {
    pub weights: Vec<f64>,
    pub percentile: f64,
    pub c_used: f64,
    pub seen: Vec<bool>,
    pub corpus_id: String,
    /// Detection settings the weights were calibrated under, if recorded.
    pub config: Option<DetectionConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    schema: String,
    percentile: f64,
    #[serde(rename = "C")]
    c: f64,
    corpus_id: String,
    weights: Map<String, Value>,
    seen: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<DetectionConfig>,
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        message: message.into(),
    }
}

impl AdjustmentTable {
    /// All weights 1.0: semantics disabled.
    pub fn uniform(classes: usize) -> Self {
        AdjustmentTable {
            weights: vec![1.0; classes],
            percentile: DEFAULT_PERCENTILE,
            c_used: 0.0,
            seen: vec![false; classes],
            corpus_id: "uniform".into(),
            config: None,
        }
    }

    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, class: u8) -> f64 {
        self.weights[class as usize]
    }

    pub fn with_metadata(mut self, c_used: f64, corpus_id: impl Into<String>) -> Self {
        self.c_used = c_used;
        self.corpus_id = corpus_id.into();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WeightsFile {
            schema: WEIGHTS_SCHEMA.into(),
            percentile: self.percentile,
            c: self.c_used,
            corpus_id: self.corpus_id.clone(),
            weights: self
                .weights
                .iter()
                .enumerate()
                .map(|(k, &w)| (k.to_string(), Value::from(w)))
                .collect(),
            seen: self
                .seen
                .iter()
                .enumerate()
                .map(|(k, &s)| (k.to_string(), Value::from(s)))
                .collect(),
            config: self.config.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        match value.get("schema").and_then(Value::as_str) {
            Some(WEIGHTS_SCHEMA) => {}
            Some(other) => {
                return Err(Error::SchemaVersionMismatch {
                    found: other.into(),
                    expected: WEIGHTS_SCHEMA.into(),
                })
            }
            None => return Err(parse_err("missing \"schema\" key")),
        }
        let file: WeightsFile = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        let classes = NUM_CLASSES;
        if file.weights.len() != classes || file.seen.len() != classes {
            return Err(parse_err(format!(
                "expected {classes} weight and seen entries, got {} and {}",
                file.weights.len(),
                file.seen.len()
            )));
        }
        let mut weights = Vec::with_capacity(classes);
        let mut seen = Vec::with_capacity(classes);
        for k in 0..classes {
            let key = k.to_string();
            let w = file
                .weights
                .get(&key)
                .and_then(Value::as_f64)
                .ok_or_else(|| parse_err(format!("weight for class {k} missing or not a number")))?;
            if !(WEIGHT_FLOOR..=1.0).contains(&w) {
                return Err(parse_err(format!("weight {w} for class {k} outside [{WEIGHT_FLOOR}, 1]")));
            }
            let s = file
                .seen
                .get(&key)
                .and_then(Value::as_bool)
                .ok_or_else(|| parse_err(format!("seen flag for class {k} missing or not a boolean")))?;
            weights.push(w);
            seen.push(s);
        }
        Ok(AdjustmentTable {
            weights,
            percentile: file.percentile,
            c_used: file.c,
            seen,
            corpus_id: file.corpus_id,
            config: file.config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Write {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn save_weights(table: &AdjustmentTable, path: impl AsRef<Path>) -> Result<()> {
    table.save(path)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<AdjustmentTable> {
    AdjustmentTable::load(path)
}

/// Scans a corpus of records into one accumulator (sharded per record,
/// merged in input order) and finalizes it. The first failing record aborts
/// the scan.
pub fn calibrate_records(
    records: &[ManifestRecord],
    cfg: &DetectionConfig,
    percentile: f64,
    histogram: bool,
    corpus_id: &str,
    exec: Execution,
) -> Result<AdjustmentTable> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfg.validate()?;
    let fresh = || {
        if histogram {
            ClassAccumulator::histogram(NUM_CLASSES)
        } else {
            ClassAccumulator::new(NUM_CLASSES)
        }
    };
    let shards = map_ordered(records, exec, |rec| -> Result<ClassAccumulator> {
        let run = || -> Result<ClassAccumulator> {
            let loaded = rec.load()?;
            let d_map = similarity_map(&loaded.mse, &loaded.gan, cfg, exec)?;
            let mut acc = fresh();
            acc.accumulate(&d_map, &loaded.labels)?;
            log::info!("calibrate {}: {} pixels", rec.id, acc.total());
            Ok(acc)
        };
        run().map_err(|e| e.in_record(&rec.id))
    });
    let mut total = fresh();
    for shard in shards {
        total = total.merge(shard?)?;
    }
    let mut table = total.finalize(percentile)?.with_metadata(cfg.c, corpus_id);
    table.config = Some(cfg.clone());
    Ok(table)
}
