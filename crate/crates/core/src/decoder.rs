//! Target transformation: turns point labels into dense target maps.
//!
//! The careless variant marks the nearest pixel of every point with 1 and
//! has no parameters. The careful variant paints a truncated Gaussian of
//! width `sigma` around every point, cut off at `radius`, combining
//! overlapping points by per-pixel max so each annotated pixel stays a
//! height-1 peak.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{Point, PointSet};

static INVOCATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of decode calls made by this process so far.
pub fn invocation_count() -> u64 {
    INVOCATIONS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum DecoderParams {
    Careless,
    Careful { sigma: f64, radius: f64 },
}

impl DecoderParams {
    pub fn careful(sigma: f64, radius: f64) -> Result<Self> {
        let p = DecoderParams::Careful { sigma, radius };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DecoderParams::Careless => Ok(()),
            DecoderParams::Careful { sigma, radius } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::config("decoder sigma must be positive"));
                }
                if !(radius >= sigma && radius.is_finite()) {
                    return Err(Error::config("decoder radius must be at least sigma"));
                }
                Ok(())
            }
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            DecoderParams::Careless => "careless",
            DecoderParams::Careful { .. } => "careful",
        }
    }
}

impl std::fmt::Display for DecoderParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecoderParams::Careless => write!(f, "careless"),
            DecoderParams::Careful { sigma, radius } => {
                write!(f, "careful(sigma={sigma}, radius={radius})")
            }
        }
    }
}

/// A dense map of values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl TargetMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(width * height, values.len()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("target values must lie in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Nearest pixel under round-half-up, clamped into the lattice (a point at
/// `x >= width - 0.5` would otherwise round off the edge).
pub fn nearest_pixel(p: &Point, width: usize, height: usize) -> (usize, usize) {
    let r = |v: f64, n: usize| ((v + 0.5).floor().max(0.0) as usize).min(n - 1);
    (r(p.x, width), r(p.y, height))
}

pub fn decode_careless(truth: &PointSet, shape: (usize, usize)) -> TargetMap {
    INVOCATIONS.fetch_add(1, Ordering::SeqCst);
    let (w, h) = shape;
    let mut map = TargetMap::zeros(w, h);
    for p in truth.iter() {
        let (x, y) = nearest_pixel(p, w, h);
        map.values[y * w + x] = 1.0;
    }
    map
}

pub fn decode_careful(truth: &PointSet, shape: (usize, usize), params: &DecoderParams) -> Result<TargetMap> {
    let DecoderParams::Careful { sigma, radius } = *params else {
        return Err(Error::VariantMismatch {
            expected: "careful",
            got: params.variant_name(),
        });
    };
    params.validate()?;
    INVOCATIONS.fetch_add(1, Ordering::SeqCst);
    let (w, h) = shape;
    let mut map = TargetMap::zeros(w, h);
    let r2 = radius * radius;
    let denom = 2.0 * sigma * sigma;
    for p in truth.iter() {
        let x0 = (p.x - radius).floor().max(0.0) as usize;
        let y0 = (p.y - radius).floor().max(0.0) as usize;
        let x1 = ((p.x + radius).ceil().max(0.0) as usize).min(w - 1);
        let y1 = ((p.y + radius).ceil().max(0.0) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = p.dist2(&Point::new(x as f64, y as f64));
                if d2 <= r2 {
                    let v = (-d2 / denom).exp();
                    let cell = &mut map.values[y * w + x];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }
    Ok(map)
}

/// Dispatches on the variant.
pub fn decode(truth: &PointSet, shape: (usize, usize), params: &DecoderParams) -> Result<TargetMap> {
    match params {
        DecoderParams::Careless => Ok(decode_careless(truth, shape)),
        DecoderParams::Careful { .. } => decode_careful(truth, shape, params),
    }
}

/// Ordered, duplicate-free list of decoder candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpace {
    candidates: Vec<DecoderParams>,
}

impl DecoderSpace {
    pub fn new(candidates: Vec<DecoderParams>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::config("decoder space must not be empty"));
        }
        for (i, c) in candidates.iter().enumerate() {
            c.validate()?;
            if candidates[..i].contains(c) {
                return Err(Error::config(format!("duplicate decoder candidate {c}")));
            }
        }
        Ok(Self { candidates })
    }

    pub fn candidates(&self) -> &[DecoderParams] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Careful candidates `(s, radius_multiplier * s)` in input order, with the
/// careless candidate first when `include_careless` is set.
pub fn decoder_grid(sigmas: &[f64], radius_multiplier: f64, include_careless: bool) -> Result<DecoderSpace> {
    if sigmas.is_empty() {
        return Err(Error::config("decoder.sigmas: must not be empty"));
    }
    if !(radius_multiplier >= 1.0) {
        return Err(Error::config("decoder.radius_multiplier: must be at least 1"));
    }
    let mut candidates = Vec::with_capacity(sigmas.len() + 1);
    if include_careless {
        candidates.push(DecoderParams::Careless);
    }
    for &s in sigmas {
        candidates.push(DecoderParams::careful(s, radius_multiplier * s)?);
    }
    DecoderSpace::new(candidates)
}
