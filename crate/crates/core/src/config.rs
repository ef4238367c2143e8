//! Detection parameters and the flat `key = value` config format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_stats::{DEFAULT_C, DEFAULT_SIGMA_FLOOR, DEFAULT_WINDOW};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_SE: usize = 5;
pub const DEFAULT_MIN_AREA: usize = 300;
pub const DEFAULT_HOLE_SE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl FromStr for Connectivity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.trim()
            .parse::<u8>()
            .map_err(|e| e.to_string())
            .and_then(Connectivity::try_from)
    }
}

/// Which similarity map drives binarization (ablations of the full method).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Stabilized similarity D with semantic weights.
    #[default]
    Full,
    /// Absolute σ difference, normalized by its per-image maximum.
    AbsD,
    /// Relative difference without the stabilized normalization, `1 / (1 + d′)`.
    NoNormalize,
    /// Full D with every class weight forced to 1.
    NoSemantics,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::AbsD, Variant::NoNormalize, Variant::NoSemantics];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::AbsD => "abs_d",
            Variant::NoNormalize => "no_normalize",
            Variant::NoSemantics => "no_semantics",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| format!("unknown variant {s:?} (expected full, abs_d, no_normalize or no_semantics)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleFill {
    /// Flood the background from the border; unreachable zeros become ones.
    #[default]
    FloodFill,
    /// Morphological closing with a square structuring element.
    Closing,
}

impl FromStr for HoleFill {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "flood_fill" => Ok(HoleFill::FloodFill),
            "closing" => Ok(HoleFill::Closing),
            other => Err(format!("unknown hole_fill {other:?} (expected flood_fill or closing)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub window: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma_floor: f64,
    pub threshold: f64,
    pub erosion_se: usize,
    pub dilation_se: usize,
    pub hole_fill: HoleFill,
    pub hole_se: usize,
    pub fill_connectivity: Connectivity,
    pub component_connectivity: Connectivity,
    pub min_area: usize,
    pub variant: Variant,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            window: DEFAULT_WINDOW,
            c: DEFAULT_C,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            threshold: DEFAULT_THRESHOLD,
            erosion_se: DEFAULT_SE,
            dilation_se: DEFAULT_SE,
            hole_fill: HoleFill::FloodFill,
            hole_se: DEFAULT_HOLE_SE,
            fill_connectivity: Connectivity::Four,
            component_connectivity: Connectivity::Eight,
            min_area: DEFAULT_MIN_AREA,
            variant: Variant::Full,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key}: {e}")))
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::EvenWindow(self.window));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::NonPositiveC(self.c));
        }
        if !(self.sigma_floor >= 0.0 && self.sigma_floor.is_finite()) {
            return bad(format!("sigma_floor {} must be non-negative", self.sigma_floor));
        }
        for (name, se) in [
            ("erosion_se", self.erosion_se),
            ("dilation_se", self.dilation_se),
            ("hole_se", self.hole_se),
        ] {
            if se == 0 || se % 2 == 0 {
                return bad(format!("{name} must be odd and at least 1, got {se}"));
            }
        }
        Ok(())
    }

    /// Sets one field from its textual form. `C` and `c` are both accepted.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "window" | "n" => self.window = parse_value(key, value)?,
            "C" | "c" => self.c = parse_value(key, value)?,
            "sigma_floor" => self.sigma_floor = parse_value(key, value)?,
            "threshold" => self.threshold = parse_value(key, value)?,
            "erosion_se" => self.erosion_se = parse_value(key, value)?,
            "dilation_se" => self.dilation_se = parse_value(key, value)?,
            "hole_fill" => self.hole_fill = parse_value(key, value)?,
            "hole_se" => self.hole_se = parse_value(key, value)?,
            "fill_connectivity" => self.fill_connectivity = parse_value(key, value)?,
            "component_connectivity" => self.component_connectivity = parse_value(key, value)?,
            "min_area" => self.min_area = parse_value(key, value)?,
            "variant" => self.variant = parse_value(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored; unknown keys are errors.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_kv_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut cfg = DetectionConfig::default();
        cfg.apply_kv(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}
