//! Dataset types and the seeded synthetic blob generator.
//!
//! Each sample is a lattice of isotropic intensity bumps on a noisy
//! background; the ground truth is the list of bump centres.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::container::round_f32;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sub_seed, Rng, STREAM_SPLIT};

/// Rejection-sampling budget for placing the points of one sample.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

/// A `width × height` grid of intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLattice {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageLattice {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("lattice dimensions must be at least 1"));
        }
        if values.len() != width * height {
            return Err(Error::shape(width * height, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::config(format!("lattice value {v} outside [0, 1]")));
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

/// A 2D position in lattice coordinates; pixel `(i, j)` has its centre at
/// `(i, j)`. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Ground-truth or predicted point labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet {
    pub points: Vec<Point>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.points
            .iter()
            .all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64)
    }
}

impl From<Vec<(f64, f64)>> for PointSet {
    fn from(v: Vec<(f64, f64)>) -> Self {
        Self::new(v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub lattice: ImageLattice,
    pub truth: PointSet,
}

impl Sample {
    pub fn new(lattice: ImageLattice, truth: PointSet) -> Result<Self> {
        if !truth.in_bounds(lattice.width, lattice.height) {
            return Err(Error::config("truth point outside lattice bounds"));
        }
        Ok(Self { lattice, truth })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn truths(&self) -> Vec<PointSet> {
        self.samples.iter().map(|s| s.truth.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub blob_count_min: usize,
    pub blob_count_max: usize,
    pub blob_amplitude: f64,
    pub blob_radius: f64,
    pub min_separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("width/height: must be at least 1"));
        }
        if self.blob_count_min > self.blob_count_max {
            return Err(Error::config(
                "blob_count_min: must not exceed blob_count_max",
            ));
        }
        if !(self.blob_amplitude > 0.0 && self.blob_amplitude <= 1.0) {
            return Err(Error::config("blob_amplitude: must lie in (0, 1]"));
        }
        if !(self.blob_radius > 0.0 && self.blob_radius.is_finite()) {
            return Err(Error::config("blob_radius: must be positive"));
        }
        let short_side = self.width.min(self.height) as f64;
        if !(self.min_separation > 0.0 && self.min_separation < short_side) {
            return Err(Error::config(
                "min_separation: must be positive and below min(width, height)",
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std: must be non-negative"));
        }
        Ok(())
    }
}

/// Intensity of one bump at squared distance `d2` from its centre.
pub fn blob_profile(d2: f64, amplitude: f64, radius: f64) -> f64 {
    let cutoff = 3.0 * radius;
    if d2 > cutoff * cutoff {
        return 0.0;
    }
    let s = radius / 2.0;
    amplitude * (-d2 / (2.0 * s * s)).exp()
}

fn place_points(cfg: &SynthConfig, k: usize, rng: &mut Rng) -> Result<Vec<Point>> {
    let mut points: Vec<Point> = Vec::with_capacity(k);
    let min_d2 = cfg.min_separation * cfg.min_separation;
    let mut attempts = 0;
    while points.len() < k {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(Error::Placement {
                wanted: k,
                attempts,
            });
        }
        attempts += 1;
        let p = Point::new(
            rng.random_range(0.0..cfg.width as f64),
            rng.random_range(0.0..cfg.height as f64),
        );
        if points.iter().all(|q| q.dist2(&p) >= min_d2) {
            points.push(p);
        }
    }
    Ok(points)
}

/// Draws one sample from `rng`.
pub fn generate_sample(cfg: &SynthConfig, rng: &mut Rng) -> Result<Sample> {
    cfg.validate()?;
    let k = rng.random_range(cfg.blob_count_min..=cfg.blob_count_max);
    let centres = place_points(cfg, k, rng)?;

    let (w, h) = (cfg.width, cfg.height);
    let mut values = vec![0.0; w * h];
    let reach = 3.0 * cfg.blob_radius;
    for c in &centres {
        let x0 = (c.x - reach).floor().max(0.0) as usize;
        let x1 = ((c.x + reach).ceil() as usize).min(w - 1);
        let y0 = (c.y - reach).floor().max(0.0) as usize;
        let y1 = ((c.y + reach).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = c.dist2(&Point::new(x as f64, y as f64));
                values[y * w + x] += blob_profile(d2, cfg.blob_amplitude, cfg.blob_radius);
            }
        }
    }
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std)
            .map_err(|e| Error::config(format!("noise_std: {e}")))?;
        for v in values.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    for v in values.iter_mut() {
        *v = round_f32(v.clamp(0.0, 1.0));
    }

    Sample::new(ImageLattice::new(w, h, values)?, PointSet::new(centres))
}

/// Generates `n` samples; sample `i` uses the stream `sub_seed(cfg.seed, i)`.
pub fn generate_dataset(cfg: &SynthConfig, n: usize) -> Result<Dataset> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::config("n: must be at least 1"));
    }
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(sub_seed(cfg.seed, i as u64));
            generate_sample(cfg, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(samples))
}

/// Fractions of a three-way split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Self {
        Self { train, val, test }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::config("split: fractions must be positive"));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split: fractions must sum to 1"));
        }
        Ok(())
    }

    /// Floor allocation for val and test; the remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon keeps e.g. 300 × (1/6) from flooring to 49.
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        (n.saturating_sub(val + test), val, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle, then partition into train / val / test.
pub fn split(ds: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Splits> {
    fractions.validate()?;
    let (n_train, n_val, n_test) = fractions.sizes(ds.len());
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::config(format!(
            "split: {} samples give an empty split ({n_train}/{n_val}/{n_test})",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng_from_seed(sub_seed(seed, STREAM_SPLIT)));
    let take = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| ds.samples[i].clone()).collect());
    Ok(Splits {
        train: take(&order[..n_train]),
        val: take(&order[n_train..n_train + n_val]),
        test: take(&order[n_train + n_val..]),
    })
}
