//! Patch-wise regressor mapping a lattice to a predicted target map.
//!
//! Every pixel is predicted from the `(2c+1)²` patch centred on it by a
//! one-hidden-layer tanh network shared across pixels:
//! `y = b2 + w2 · tanh(w1 · patch + b1)`. Borders use reflect padding.
//! Training is plain SGD on the mean squared error against decoded targets.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::container::{self, round_f32};
use crate::dataset_io::{read_json, write_json};
use crate::decoder::TargetMap;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, sub_seed, STREAM_INIT, STREAM_SGD};
use crate::synth::ImageLattice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub context_radius: usize,
    pub hidden_units: usize,
}

impl Architecture {
    pub fn new(context_radius: usize, hidden_units: usize) -> Result<Self> {
        let arch = Self {
            context_radius,
            hidden_units,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::config("inferrer.hidden_units: must be at least 1"));
        }
        Ok(())
    }

    pub fn patch_side(&self) -> usize {
        2 * self.context_radius + 1
    }

    pub fn input_dim(&self) -> usize {
        self.patch_side() * self.patch_side()
    }

    /// Total number of scalars in `w1, b1, w2, b2`.
    pub fn param_count(&self) -> usize {
        let (h, d) = (self.hidden_units, self.input_dim());
        h * d + h + h + 1
    }
}

/// Network weights, stored flat in the order `w1` (row-major,
/// `hidden × input`), `b1`, `w2`, `b2`.
///
/// The same type doubles as the container for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct InferrerParams {
    arch: Architecture,
    data: Vec<f64>,
}

impl InferrerParams {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            data: vec![0.0; arch.param_count()],
        }
    }

    pub fn from_flat(arch: Architecture, data: Vec<f64>) -> Result<Self> {
        if data.len() != arch.param_count() {
            return Err(Error::shape(arch.param_count(), data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("inferrer parameters must be finite"));
        }
        Ok(Self { arch, data })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn split_offsets(&self) -> (usize, usize, usize) {
        let (h, d) = (self.arch.hidden_units, self.arch.input_dim());
        (h * d, h * d + h, h * d + 2 * h)
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..self.split_offsets().0]
    }

    pub fn b1(&self) -> &[f64] {
        let (a, b, _) = self.split_offsets();
        &self.data[a..b]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, b, c) = self.split_offsets();
        &self.data[b..c]
    }

    pub fn b2(&self) -> f64 {
        self.data[self.split_offsets().2]
    }

    pub fn set_b2(&mut self, v: f64) {
        let i = self.split_offsets().2;
        self.data[i] = v;
    }

    fn parts_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut f64) {
        let (a, b, c) = self.split_offsets();
        let (w1, rest) = self.data.split_at_mut(a);
        let (b1, rest) = rest.split_at_mut(b - a);
        let (w2, rest) = rest.split_at_mut(c - b);
        (w1, b1, w2, &mut rest[0])
    }

    /// Rounds every entry through `f32`, the precision of the model file.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = round_f32(*v);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Glorot-uniform weights in `(-b, b)`, `b = sqrt(6 / (fan_in + fan_out))`
/// per layer; zero biases. Values are representable in `f32`.
pub fn init_params(arch: Architecture, seed: u64) -> InferrerParams {
    let mut rng = rng_from_seed(sub_seed(seed, STREAM_INIT));
    let mut params = InferrerParams::zeros(arch);
    let (d, h) = (arch.input_dim(), arch.hidden_units);
    let bound1 = layer_bound(d, h);
    let bound2 = layer_bound(h, 1);
    let mut draw = |b: f64| loop {
        let v = round_f32(rng.random_range(-b..b));
        if v.abs() < b {
            break v;
        }
    };
    let (w1, _, w2, _) = params.parts_mut();
    for v in w1.iter_mut() {
        *v = draw(bound1);
    }
    for v in w2.iter_mut() {
        *v = draw(bound2);
    }
    params
}

pub fn layer_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Forward pass for one patch, writing hidden activations into `hidden`.
fn forward(params: &InferrerParams, patch: &[f64], hidden: &mut [f64]) -> f64 {
    let d = params.arch.input_dim();
    let (w1, b1, w2, b2) = (params.w1(), params.b1(), params.w2(), params.b2());
    let mut out = b2;
    for (k, hk) in hidden.iter_mut().enumerate() {
        let row = &w1[k * d..(k + 1) * d];
        let a = b1[k] + dot(row, patch);
        *hk = a.tanh();
        out += w2[k] * *hk;
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Raw network output for one patch.
pub fn predict_pixel(params: &InferrerParams, patch: &[f64]) -> Result<f64> {
    let d = params.arch.input_dim();
    if patch.len() != d {
        return Err(Error::shape(format!("patch of {d} values"), patch.len()));
    }
    let mut hidden = vec![0.0; params.arch.hidden_units];
    Ok(forward(params, patch, &mut hidden))
}

/// Maps an index in `-n..2n` back into `0..n` by mirroring about the edge
/// pixels (the edge itself is not repeated).
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// A lattice with a reflected border of `pad` pixels on every side.
#[derive(Debug, Clone)]
pub struct PaddedLattice {
    width: usize,
    height: usize,
    pad: usize,
    stride: usize,
    values: Vec<f64>,
}

impl PaddedLattice {
    pub fn new(lattice: &ImageLattice, pad: usize) -> Self {
        let (w, h) = lattice.shape();
        let stride = w + 2 * pad;
        let mut values = Vec::with_capacity(stride * (h + 2 * pad));
        for py in 0..h + 2 * pad {
            let y = reflect_index(py as isize - pad as isize, h);
            for px in 0..stride {
                let x = reflect_index(px as isize - pad as isize, w);
                values.push(lattice.get(x, y));
            }
        }
        Self {
            width: w,
            height: h,
            pad,
            stride,
            values,
        }
    }

    /// Writes the `(2·pad+1)²` patch centred on lattice pixel `(x, y)` into
    /// `out`, row-major.
    pub fn patch_into(&self, x: usize, y: usize, out: &mut [f64]) {
        let side = 2 * self.pad + 1;
        debug_assert!(x < self.width && y < self.height);
        for r in 0..side {
            let start = (y + r) * self.stride + x;
            out[r * side..(r + 1) * side].copy_from_slice(&self.values[start..start + side]);
        }
    }
}

/// Raw predicted map; values are unbounded until the encoder clamps them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PredictedMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(width * height, values.len()));
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

impl From<TargetMap> for PredictedMap {
    fn from(t: TargetMap) -> Self {
        let (w, h) = t.shape();
        Self {
            width: w,
            height: h,
            values: t.values().to_vec(),
        }
    }
}

pub fn infer(lattice: &ImageLattice, params: &InferrerParams) -> PredictedMap {
    use rayon::prelude::*;

    let (w, h) = lattice.shape();
    let padded = PaddedLattice::new(lattice, params.arch.context_radius);
    let d = params.arch.input_dim();
    let mut values = vec![0.0; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut patch = vec![0.0; d];
        let mut hidden = vec![0.0; params.arch.hidden_units];
        for (x, out) in row.iter_mut().enumerate() {
            padded.patch_into(x, y, &mut patch);
            *out = forward(params, &patch, &mut hidden);
        }
    });
    PredictedMap {
        width: w,
        height: h,
        values,
    }
}

/// Mean squared error between a predicted map and its target.
pub fn loss_i(t: &PredictedMap, t_star: &TargetMap) -> Result<f64> {
    if t.shape() != t_star.shape() {
        return Err(Error::shape(format!("{:?}", t_star.shape()), format!("{:?}", t.shape())));
    }
    let n = t.values.len() as f64;
    Ok(t.values
        .iter()
        .zip(t_star.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Patches (flat, row-major, one per example) with their scalar targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    input_dim: usize,
    patches: Vec<f64>,
    targets: Vec<f64>,
}

impl Minibatch {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            patches: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn from_pairs(input_dim: usize, pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut mb = Self::new(input_dim);
        for (p, t) in pairs {
            mb.push(p, *t)?;
        }
        Ok(mb)
    }

    pub fn push(&mut self, patch: &[f64], target: f64) -> Result<()> {
        if patch.len() != self.input_dim {
            return Err(Error::shape(self.input_dim, patch.len()));
        }
        self.patches.extend_from_slice(patch);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.patches[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    fn clear(&mut self) {
        self.patches.clear();
        self.targets.clear();
    }
}

/// Mean squared error of the network over a minibatch.
pub fn batch_loss(params: &InferrerParams, batch: &Minibatch) -> f64 {
    let mut hidden = vec![0.0; params.arch.hidden_units];
    let mut sum = 0.0;
    for i in 0..batch.len() {
        let e = forward(params, batch.patch(i), &mut hidden) - batch.target(i);
        sum += e * e;
    }
    sum / batch.len() as f64
}

/// Analytic gradient of the minibatch mean squared error.
pub fn gradient(params: &InferrerParams, batch: &Minibatch) -> Result<InferrerParams> {
    if batch.is_empty() {
        return Err(Error::config("gradient of an empty minibatch"));
    }
    if batch.input_dim != params.arch.input_dim() {
        return Err(Error::shape(params.arch.input_dim(), batch.input_dim));
    }
    let mut grad = InferrerParams::zeros(params.arch);
    let mut hidden = vec![0.0; params.arch.hidden_units];
    accumulate_gradient(params, batch, &mut grad, &mut hidden);
    Ok(grad)
}

/// Overwrites `grad` with the gradient and returns the minibatch loss.
/// Examples are reduced in ascending index order.
fn accumulate_gradient(
    params: &InferrerParams,
    batch: &Minibatch,
    grad: &mut InferrerParams,
    hidden: &mut [f64],
) -> f64 {
    grad.data.iter_mut().for_each(|g| *g = 0.0);
    let d = params.arch.input_dim();
    let scale = 2.0 / batch.len() as f64;
    let w2 = params.w2().to_vec();
    let (gw1, gb1, gw2, gb2) = grad.parts_mut();
    let mut sum_sq = 0.0;
    for i in 0..batch.len() {
        let x = batch.patch(i);
        let err = forward(params, x, hidden) - batch.target(i);
        sum_sq += err * err;
        let e = scale * err;
        *gb2 += e;
        for k in 0..hidden.len() {
            let hk = hidden[k];
            gw2[k] += e * hk;
            let delta = e * w2[k] * (1.0 - hk * hk);
            gb1[k] += delta;
            let row = &mut gw1[k * d..(k + 1) * d];
            for (g, xj) in row.iter_mut().zip(x) {
                *g += delta * xj;
            }
        }
    }
    sum_sq / batch.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_pixels: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("inferrer.epochs: must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("inferrer.learning_rate: must be non-negative"));
        }
        if self.batch_pixels == 0 {
            return Err(Error::config("inferrer.batch_pixels: must be at least 1"));
        }
        Ok(())
    }
}

/// Loss record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub steps_per_epoch: usize,
    /// Mean minibatch loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

/// One epoch is as many steps as it takes to draw as many pixels as the
/// training set holds.
pub fn steps_per_epoch(total_pixels: usize, batch_pixels: usize) -> usize {
    total_pixels.div_ceil(batch_pixels).max(1)
}

/// Trains from the `init_params(arch, cfg.seed)` starting point with SGD.
/// Minibatches draw `(lattice, pixel)` pairs uniformly with replacement.
/// Returned weights are rounded to `f32` precision.
pub fn train(
    lattices: &[ImageLattice],
    targets: &[TargetMap],
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<(InferrerParams, TrainTrace)> {
    arch.validate()?;
    cfg.validate()?;
    if lattices.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if lattices.len() != targets.len() {
        return Err(Error::shape(
            format!("{} target maps", lattices.len()),
            targets.len(),
        ));
    }
    for (l, t) in lattices.iter().zip(targets) {
        if l.shape() != t.shape() {
            return Err(Error::shape(format!("{:?}", l.shape()), format!("{:?}", t.shape())));
        }
    }

    let padded: Vec<PaddedLattice> = lattices
        .iter()
        .map(|l| PaddedLattice::new(l, arch.context_radius))
        .collect();
    let total_pixels: usize = lattices.iter().map(|l| l.width() * l.height()).sum();
    let spe = steps_per_epoch(total_pixels, cfg.batch_pixels);

    let mut params = init_params(arch, cfg.seed);
    let mut grad = InferrerParams::zeros(arch);
    let mut hidden = vec![0.0; arch.hidden_units];
    let mut batch = Minibatch::new(arch.input_dim());
    let mut patch = vec![0.0; arch.input_dim()];
    let mut rng = rng_from_seed(sub_seed(cfg.seed, STREAM_SGD));
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut epoch_sum = 0.0;
        for _ in 0..spe {
            batch.clear();
            for _ in 0..cfg.batch_pixels {
                let n = rng.random_range(0..lattices.len());
                let (w, h) = lattices[n].shape();
                let x = rng.random_range(0..w);
                let y = rng.random_range(0..h);
                padded[n].patch_into(x, y, &mut patch);
                batch.patches.extend_from_slice(&patch);
                batch.targets.push(targets[n].get(x, y));
            }
            let loss = accumulate_gradient(&params, &batch, &mut grad, &mut hidden);
            if !loss.is_finite() {
                return Err(Error::Divergence { step });
            }
            epoch_sum += loss;
            if cfg.learning_rate != 0.0 {
                for (p, g) in params.data.iter_mut().zip(&grad.data) {
                    *p -= cfg.learning_rate * g;
                }
                if !params.is_finite() {
                    return Err(Error::Divergence { step });
                }
            }
            step += 1;
        }
        let mean = epoch_sum / spe as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        epoch_losses.push(mean);
    }
    params.round_to_f32();
    Ok((
        params,
        TrainTrace {
            steps_per_epoch: spe,
            epoch_losses,
        },
    ))
}

/// Model metadata stored next to the weight container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub param_count: usize,
    pub weights_file: String,
}

pub fn save_model(json_path: &Path, bin_path: &Path, params: &InferrerParams, cfg: &TrainConfig) -> Result<()> {
    let meta = ModelMeta {
        architecture: params.arch,
        train_config: cfg.clone(),
        seed: cfg.seed,
        param_count: params.data.len(),
        weights_file: bin_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    container::write(bin_path, params.data.len() as u32, 1, &params.data)?;
    write_json(json_path, &meta)
}

pub fn load_model(json_path: &Path) -> Result<(InferrerParams, ModelMeta)> {
    let meta: ModelMeta = read_json(json_path)?;
    let dir = json_path.parent().unwrap_or(Path::new("."));
    let bin = dir.join(&meta.weights_file);
    let (w, h, data) = container::read(&bin)?;
    if h != 1 || w as usize != meta.architecture.param_count() {
        return Err(Error::Container {
            path: bin,
            reason: format!(
                "{w}x{h} does not hold {} parameters",
                meta.architecture.param_count()
            ),
        });
    }
    Ok((InferrerParams::from_flat(meta.architecture, data)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn arch() -> Architecture {
        Architecture::new(1, 4).unwrap()
    }

    fn random_params(arch: Architecture, seed: u64) -> InferrerParams {
        let mut rng = rng_from_seed(seed);
        let data = (0..arch.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        InferrerParams::from_flat(arch, data).unwrap()
    }

    // straight-line forward evaluation kept independent of `forward`
    fn reference_forward(p: &InferrerParams, x: &[f64]) -> f64 {
        let (h, d) = (p.arch().hidden_units, p.arch().input_dim());
        let mut y = p.b2();
        for k in 0..h {
            let mut a = p.b1()[k];
            for j in 0..d {
                a += p.w1()[k * d + j] * x[j];
            }
            y += p.w2()[k] * a.tanh();
        }
        y
    }

    #[test]
    fn init_is_seeded_bounded_with_zero_biases() {
        let a = Architecture::new(2, 8).unwrap();
        let p = init_params(a, 3);
        assert_eq!(p, init_params(a, 3));
        assert_ne!(p, init_params(a, 4));
        assert!(p.b1().iter().all(|b| *b == 0.0));
        assert_eq!(p.b2(), 0.0);
        let b1 = layer_bound(25, 8);
        let b2 = layer_bound(8, 1);
        assert!(p.w1().iter().all(|w| w.abs() < b1));
        assert!(p.w2().iter().all(|w| w.abs() < b2));
        assert!(p.as_slice().iter().all(|v| *v == round_f32(*v)));
    }

    #[test]
    fn predict_pixel_basics() {
        let a = arch();
        let zero = InferrerParams::zeros(a);
        assert_eq!(predict_pixel(&zero, &[0.3; 9]).unwrap(), 0.0);
        let mut c = InferrerParams::zeros(a);
        c.set_b2(0.7);
        assert_eq!(predict_pixel(&c, &[0.9; 9]).unwrap(), 0.7);
        assert!(matches!(predict_pixel(&c, &[0.0; 8]), Err(Error::Shape { .. })));

        let mut rng = rng_from_seed(1);
        for s in 0..20 {
            let p = random_params(a, s);
            let x: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
            assert!((predict_pixel(&p, &x).unwrap() - reference_forward(&p, &x)).abs() < 1e-12);
        }
    }

    #[test]
    fn reflect_padding_indices() {
        let got: Vec<usize> = (-3..8).map(|i| reflect_index(i, 5)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect_index(-4, 1), 0);
        // narrower than the pad: keeps bouncing
        assert_eq!(reflect_index(-3, 2), 1);
        assert_eq!(reflect_index(4, 2), 0);
    }

    #[test]
    fn infer_matches_manual_patch() {
        let mut rng = rng_from_seed(2);
        let vals: Vec<f64> = (0..7 * 6).map(|_| rng.random_range(0.0..1.0)).collect();
        let lat = ImageLattice::new(7, 6, vals).unwrap();
        let p = random_params(arch(), 9);
        let out = infer(&lat, &p);
        assert_eq!(out.shape(), (7, 6));
        let (x, y) = (3usize, 2usize);
        let mut patch = Vec::new();
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                patch.push(lat.get((x as i64 + dx) as usize, (y as i64 + dy) as usize));
            }
        }
        assert!((out.get(x, y) - reference_forward(&p, &patch)).abs() < 1e-12);

        // a corner pixel uses the mirrored neighbours
        let corner = [
            lat.get(1, 1), lat.get(0, 1), lat.get(1, 1),
            lat.get(1, 0), lat.get(0, 0), lat.get(1, 0),
            lat.get(1, 1), lat.get(0, 1), lat.get(1, 1),
        ];
        assert!((out.get(0, 0) - reference_forward(&p, &corner)).abs() < 1e-12);

        let zero = infer(&lat, &InferrerParams::zeros(arch()));
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let mut c = InferrerParams::zeros(arch());
        c.set_b2(0.25);
        assert!(infer(&lat, &c).values().iter().all(|v| *v == 0.25));
    }

    #[test]
    fn loss_i_cases() {
        let t = TargetMap::new(2, 2, vec![0.0, 0.5, 1.0, 0.25]).unwrap();
        let same = PredictedMap::from(t.clone());
        assert_eq!(loss_i(&same, &t).unwrap(), 0.0);
        let shifted = PredictedMap::new(2, 2, t.values().iter().map(|v| v + 0.5).collect()).unwrap();
        assert!((loss_i(&shifted, &t).unwrap() - 0.25).abs() < 1e-15);
        let wrong = PredictedMap::new(1, 4, vec![0.0; 4]).unwrap();
        assert!(loss_i(&wrong, &t).is_err());

        let mut rng = rng_from_seed(4);
        let (w, h) = (9, 5);
        let a: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..2.0)).collect();
        let b: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect();
        let pa = PredictedMap::new(w, h, a.clone()).unwrap();
        let tb = TargetMap::new(w, h, b.clone()).unwrap();
        let mut naive = 0.0;
        for y in 0..h {
            for x in 0..w {
                let diff = a[y * w + x] - b[y * w + x];
                naive += diff * diff;
            }
        }
        naive /= (w * h) as f64;
        assert!((loss_i(&pa, &tb).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_case_and_mean_invariance() {
        let a = arch();
        let zero = InferrerParams::zeros(a);
        let mb = Minibatch::from_pairs(9, &[(vec![0.0; 9], 0.0), (vec![0.0; 9], 0.0)]).unwrap();
        let g = gradient(&zero, &mb).unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 0.0));

        let p = random_params(a, 5);
        let mut rng = rng_from_seed(6);
        let pairs: Vec<(Vec<f64>, f64)> = (0..5)
            .map(|_| ((0..9).map(|_| rng.random_range(0.0..1.0)).collect(), rng.random_range(0.0..1.0)))
            .collect();
        let doubled: Vec<(Vec<f64>, f64)> = pairs.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        let g1 = gradient(&p, &Minibatch::from_pairs(9, &pairs).unwrap()).unwrap();
        let g2 = gradient(&p, &Minibatch::from_pairs(9, &doubled).unwrap()).unwrap();
        for (x, y) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        assert!(gradient(&p, &Minibatch::new(9)).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = Architecture::new(1, 3).unwrap();
        let mut rng = rng_from_seed(8);
        for probe in 0..10 {
            let p = random_params(a, 100 + probe);
            let pairs: Vec<(Vec<f64>, f64)> = (0..4)
                .map(|_| ((0..9).map(|_| rng.random_range(0.0..1.0)).collect(), rng.random_range(0.0..1.0)))
                .collect();
            let mb = Minibatch::from_pairs(9, &pairs).unwrap();
            let g = gradient(&p, &mb).unwrap();
            for i in 0..a.param_count() {
                let mut plus = p.clone();
                plus.as_mut_slice()[i] += 1e-4;
                let mut minus = p.clone();
                minus.as_mut_slice()[i] -= 1e-4;
                let fd = (batch_loss(&plus, &mb) - batch_loss(&minus, &mb)) / 2e-4;
                let an = g.as_slice()[i];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4 || (an - fd).abs() < 1e-10, "param {i}: {an} vs {fd}");
            }
        }
    }

    fn tiny_problem() -> (Vec<ImageLattice>, Vec<TargetMap>) {
        let mut rng = rng_from_seed(12);
        let lat = ImageLattice::new(8, 8, (0..64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let t = TargetMap::new(8, 8, vec![0.5; 64]).unwrap();
        (vec![lat], vec![t])
    }

    #[test]
    fn train_zero_rate_returns_initial_params() {
        let (l, t) = tiny_problem();
        let cfg = TrainConfig { epochs: 3, learning_rate: 0.0, batch_pixels: 16, seed: 7 };
        let (p, _) = train(&l, &t, arch(), &cfg).unwrap();
        assert_eq!(p, init_params(arch(), 7));
    }

    #[test]
    fn train_is_deterministic_and_descends() {
        let (l, t) = tiny_problem();
        let cfg = TrainConfig { epochs: 200, learning_rate: 0.05, batch_pixels: 16, seed: 7 };
        let (p1, tr1) = train(&l, &t, arch(), &cfg).unwrap();
        let (p2, tr2) = train(&l, &t, arch(), &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(tr1, tr2);
        assert_eq!(tr1.epoch_losses.len(), 200);
        assert_eq!(tr1.steps_per_epoch, 4);
        assert!(tr1.epoch_losses.last().unwrap() < tr1.epoch_losses.first().unwrap());

        let initial = loss_i(&infer(&l[0], &init_params(arch(), 7)), &t[0]).unwrap();
        let fin = loss_i(&infer(&l[0], &p1), &t[0]).unwrap();
        assert!(fin < initial, "{fin} !< {initial}");
    }

    #[test]
    fn train_reports_divergence() {
        let (l, t) = tiny_problem();
        let cfg = TrainConfig { epochs: 50, learning_rate: 1e6, batch_pixels: 16, seed: 1 };
        match train(&l, &t, arch(), &cfg) {
            Err(Error::Divergence { step }) => assert!(step < 50 * 4),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn train_rejects_mismatched_inputs() {
        let (l, _) = tiny_problem();
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.1, batch_pixels: 4, seed: 0 };
        assert!(train(&l, &[], arch(), &cfg).is_err());
        let wrong = vec![TargetMap::zeros(4, 4)];
        assert!(train(&l, &wrong, arch(), &cfg).is_err());
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = random_params(arch(), 3);
        p.round_to_f32();
        let cfg = TrainConfig { epochs: 1, learning_rate: 0.1, batch_pixels: 4, seed: 0 };
        let (j, b) = (dir.path().join("model.json"), dir.path().join("model.bin"));
        save_model(&j, &b, &p, &cfg).unwrap();
        let raw = std::fs::read(&b).unwrap();
        assert_eq!(u32::from_le_bytes(raw[4..8].try_into().unwrap()) as usize, arch().param_count());
        assert_eq!(u32::from_le_bytes(raw[8..12].try_into().unwrap()), 1);
        let (back, meta) = load_model(&j).unwrap();
        assert_eq!(back, p);
        assert_eq!(meta.train_config, cfg);
        std::fs::remove_file(&b).unwrap();
        assert!(matches!(load_model(&j), Err(Error::MissingArtifact(_))));
    }
}
