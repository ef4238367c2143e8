//! Local texture statistics and the texture-distance family.
//!
//! `σ` is the population standard deviation over an `n × n` window on the
//! symmetrically reflected plane, evaluated in O(1) per pixel through
//! summed-area tables. The distance maps compare a GAN-SR `σ` map against an
//! MSE-SR one:
//!
//! * absolute distance `d = (σx − σy)²`
//! * relative distance `d′ = (σx − σy)² / (2 σx σy)`
//! * similarity `D = 2 σx σy / (σx² + σy² + C)`, where `1 / (1 + d′)` is the
//!   `C = 0` case.

use crate::error::{check_dims, Error, Result};
use crate::exec::{for_each_row, Execution};
use crate::image_io::ImagePlane;

/// Default window edge length.
pub const DEFAULT_WINDOW: usize = 11;
/// Default stabilizer for [`texture_similarity`].
pub const DEFAULT_C: f64 = 1e-7;
/// Default flat-region guard for [`texture_similarity`].
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;
/// Stand-in for an unbounded relative distance.
pub const REL_SENTINEL: f64 = f64::MAX;

/// Summed-area tables of samples and squared samples, `(H + 1) × (W + 1)`
/// with a zero first row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTables {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl IntegralTables {
    fn from_samples(width: usize, height: usize, samples: impl Iterator<Item = f64>) -> Self {
        let stride = width + 1;
        let mut sum = vec![0.0; stride * (height + 1)];
        let mut sum_sq = vec![0.0; stride * (height + 1)];
        let mut samples = samples;
        for y in 0..height {
            let mut row = 0.0;
            let mut row_sq = 0.0;
            for x in 0..width {
                let v = samples.next().expect("sample count matches dimensions");
                row += v;
                row_sq += v * v;
                let i = (y + 1) * stride + x + 1;
                sum[i] = sum[i - stride] + row;
                sum_sq[i] = sum_sq[i - stride] + row_sq;
            }
        }
        IntegralTables {
            width,
            height,
            sum,
            sum_sq,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Prefix sum over `[0, x) × [0, y)`.
    pub fn sum_at(&self, x: usize, y: usize) -> f64 {
        self.sum[y * (self.width + 1) + x]
    }

    /// Prefix sum of squares over `[0, x) × [0, y)`.
    pub fn sum_sq_at(&self, x: usize, y: usize) -> f64 {
        self.sum_sq[y * (self.width + 1) + x]
    }

    /// `(Σv, Σv²)` over the half-open rectangle `[x0, x1) × [y0, y1)`.
    pub fn rect_sums(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (f64, f64) {
        let s = |t: &[f64], x: usize, y: usize| t[y * (self.width + 1) + x];
        let a = s(&self.sum, x1, y1) - s(&self.sum, x0, y1) - s(&self.sum, x1, y0) + s(&self.sum, x0, y0);
        let b = s(&self.sum_sq, x1, y1) - s(&self.sum_sq, x0, y1) - s(&self.sum_sq, x1, y0)
            + s(&self.sum_sq, x0, y0);
        (a, b)
    }
}

pub fn integral_tables(plane: &ImagePlane) -> IntegralTables {
    IntegralTables::from_samples(plane.width(), plane.height(), plane.data().iter().copied())
}

/// Per-pixel local standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMap {
    width: usize,
    height: usize,
    sigma: Vec<f64>,
}

impl SigmaMap {
    pub fn new(width: usize, height: usize, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} values for a {width}×{height} σ map, got {}",
                width * height,
                sigma.len()
            )));
        }
        if let Some(bad) = sigma.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidConfig(format!("σ must be non-negative, got {bad}")));
        }
        Ok(SigmaMap { width, height, sigma })
    }

    /// Constant σ map, mostly for tests and scalar spot checks.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
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

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.sigma[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    AbsD,
    RelD,
    SimilarityD,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::AbsD => "abs_d",
            MapKind::RelD => "rel_d",
            MapKind::SimilarityD => "similarity_D",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    kind: MapKind,
}

impl DistanceMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, kind: MapKind) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "expected {} values for a {width}×{height} map, got {}",
                width * height,
                values.len()
            )));
        }
        let ok = match kind {
            MapKind::AbsD | MapKind::RelD => values.iter().all(|v| *v >= 0.0),
            MapKind::SimilarityD => values.iter().all(|v| (0.0..=1.0).contains(v)),
        };
        if !ok {
            return Err(Error::InvalidConfig(format!("values out of range for a {} map", kind.name())));
        }
        Ok(DistanceMap {
            width,
            height,
            values,
            kind,
        })
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Index into `[0, len)` after symmetric (edge-repeating) reflection, valid
/// for any offset including windows wider than the plane.
pub fn reflect_index(i: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let m = i.rem_euclid(period) as usize;
    if m < len {
        m
    } else {
        2 * len - 1 - m
    }
}

pub fn local_sigma(plane: &ImagePlane, n: usize) -> Result<SigmaMap> {
    local_sigma_with(plane, n, Execution::default())
}

/// [`local_sigma`] with an explicit execution strategy. Output is
/// bit-identical across strategies.
pub fn local_sigma_with(plane: &ImagePlane, n: usize, exec: Execution) -> Result<SigmaMap> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::EvenWindow(n));
    }
    let (w, h) = plane.dims();
    if w == 0 || h == 0 {
        return SigmaMap::new(w, h, Vec::new());
    }
    let r = (n / 2) as isize;
    let pw = w + n - 1;
    let ph = h + n - 1;
    let data = plane.data();
    // Shifting by one sample keeps prefix sums small and makes flat planes exact zeros.
    let offset = data.first().copied().unwrap_or(0.0);
    let padded = (0..ph).flat_map(|py| {
        let sy = reflect_index(py as isize - r, h);
        (0..pw).map(move |px| {
            let sx = reflect_index(px as isize - r, w);
            data[sy * w + sx] - offset
        })
    });
    let tables = IntegralTables::from_samples(pw, ph, padded);
    let count = (n * n) as f64;
    let mut sigma = vec![0.0; w * h];
    for_each_row(&mut sigma, w, exec, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let (s, s2) = tables.rect_sums(x, y, x + n, y + n);
            let mean = s / count;
            let var = (s2 / count - mean * mean).max(0.0);
            *out = var.sqrt();
        }
    });
    Ok(SigmaMap {
        width: w,
        height: h,
        sigma,
    })
}

fn zip_maps(sx: &SigmaMap, sy: &SigmaMap, mut f: impl FnMut(f64, f64) -> Result<f64>) -> Result<Vec<f64>> {
    check_dims(sx.dims(), sy.dims())?;
    sx.sigma.iter().zip(&sy.sigma).map(|(&a, &b)| f(a, b)).collect()
}

/// `d = (σx − σy)²`.
pub fn texture_distance_abs(sx: &SigmaMap, sy: &SigmaMap) -> Result<DistanceMap> {
    let values = zip_maps(sx, sy, |a, b| Ok((a - b) * (a - b)))?;
    Ok(DistanceMap {
        width: sx.width,
        height: sx.height,
        values,
        kind: MapKind::AbsD,
    })
}

pub fn relative_distance(a: f64, b: f64) -> f64 {
    let prod = a * b;
    if prod > 0.0 {
        (a - b) * (a - b) / (2.0 * prod)
    } else {
        REL_SENTINEL
    }
}

/// `d′ = (σx − σy)² / (2 σx σy)`; pixels with a vanishing product take [`REL_SENTINEL`].
pub fn texture_distance_rel(sx: &SigmaMap, sy: &SigmaMap) -> Result<DistanceMap> {
    let values = zip_maps(sx, sy, |a, b| Ok(relative_distance(a, b)))?;
    Ok(DistanceMap {
        width: sx.width,
        height: sx.height,
        values,
        kind: MapKind::RelD,
    })
}

/// Scalar similarity with the flat-region guard; `None` when the value is
/// undefined (zero denominator).
pub fn similarity(a: f64, b: f64, c: f64, sigma_floor: f64) -> Option<f64> {
    if a < sigma_floor && b < sigma_floor {
        return Some(1.0);
    }
    let den = a * a + b * b + c;
    if den > 0.0 && (c > 0.0 || a * b > 0.0) {
        Some((2.0 * a * b / den).clamp(0.0, 1.0))
    } else {
        None
    }
}

/// `D = 2 σx σy / (σx² + σy² + C)`, with `D = 1` where both σ fall below
/// `sigma_floor` (no texture in either image).
pub fn texture_similarity(sx: &SigmaMap, sy: &SigmaMap, c: f64, sigma_floor: f64) -> Result<DistanceMap> {
    if !c.is_finite() || c < 0.0 {
        return Err(Error::NonPositiveC(c));
    }
    let values = zip_maps(sx, sy, |a, b| similarity(a, b, c, sigma_floor).ok_or(Error::NonPositiveC(c)))?;
    Ok(DistanceMap {
        width: sx.width,
        height: sx.height,
        values,
        kind: MapKind::SimilarityD,
    })
}

/// `1 / (1 + d′)`: the unstabilized similarity, used by the no-normalization
/// ablation. The flat-region guard still applies.
pub fn unstabilized_similarity(sx: &SigmaMap, sy: &SigmaMap, sigma_floor: f64) -> Result<DistanceMap> {
    let values = zip_maps(sx, sy, |a, b| {
        if a < sigma_floor && b < sigma_floor {
            Ok(1.0)
        } else {
            Ok(1.0 / (1.0 + relative_distance(a, b)))
        }
    })?;
    Ok(DistanceMap {
        width: sx.width,
        height: sx.height,
        values,
        kind: MapKind::SimilarityD,
    })
}

/// `1 − d / max(d)`: the absolute distance rescaled per image onto the
/// similarity scale, so the absolute-difference ablation shares the
/// threshold rule. An all-zero `d` maps to 1 everywhere.
pub fn normalized_abs_similarity(sx: &SigmaMap, sy: &SigmaMap) -> Result<DistanceMap> {
    let d = texture_distance_abs(sx, sy)?;
    let max = d.values.iter().copied().fold(0.0, f64::max);
    let values = if max > 0.0 {
        d.values.iter().map(|v| (1.0 - v / max).clamp(0.0, 1.0)).collect()
    } else {
        vec![1.0; d.values.len()]
    };
    Ok(DistanceMap {
        width: d.width,
        height: d.height,
        values,
        kind: MapKind::SimilarityD,
    })
}
