//! Peak extraction from predicted maps, and the exhaustive fit of the
//! threshold / suppression-distance pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inferrer::PredictedMap;
use crate::metrics::detection_loss;
use crate::synth::{Point, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderParams {
    pub threshold: f64,
    pub min_separation: f64,
}

impl EncoderParams {
    pub fn new(threshold: f64, min_separation: f64) -> Result<Self> {
        let p = Self {
            threshold,
            min_separation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(format!(
                "encoder threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if !(self.min_separation >= 1.0 && self.min_separation.is_finite()) {
            return Err(Error::config(format!(
                "encoder min_separation {} below 1",
                self.min_separation
            )));
        }
        Ok(())
    }
}

/// Pixels that are `>=` all in-bounds 8-neighbours of the clamped map,
/// as `(value, row-major index)`, unsorted.
fn local_maxima(map: &PredictedMap) -> Vec<(f64, usize)> {
    let (w, h) = map.shape();
    let v = |x: usize, y: usize| map.get(x, y).clamp(0.0, 1.0);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let c = v(x, y);
            let mut is_peak = true;
            'scan: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) && v(nx, ny) > c {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                out.push((c, y * w + x));
            }
        }
    }
    out
}

fn suppress(mut candidates: Vec<(f64, usize)>, params: &EncoderParams, width: usize) -> PointSet {
    candidates.retain(|(v, _)| *v >= params.threshold);
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let min_d2 = params.min_separation * params.min_separation;
    let mut kept: Vec<Point> = Vec::new();
    for (_, idx) in candidates {
        let p = Point::new((idx % width) as f64, (idx / width) as f64);
        if kept.iter().all(|q| q.dist2(&p) >= min_d2) {
            kept.push(p);
        }
    }
    PointSet::new(kept)
}

/// Clamp, find plateau-tolerant local maxima at or above the threshold,
/// then greedy suppression in descending value order (ties row-major).
pub fn encode(map: &PredictedMap, params: &EncoderParams) -> PointSet {
    suppress(local_maxima(map), params, map.width())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpace {
    candidates: Vec<EncoderParams>,
}

impl EncoderSpace {
    pub fn new(candidates: Vec<EncoderParams>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::config("encoder space must not be empty"));
        }
        for (i, c) in candidates.iter().enumerate() {
            c.validate()?;
            if candidates[..i].contains(c) {
                return Err(Error::config(format!("duplicate encoder candidate {c:?}")));
            }
        }
        Ok(Self { candidates })
    }

    pub fn candidates(&self) -> &[EncoderParams] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Cartesian product, threshold-major.
pub fn encoder_grid(thresholds: &[f64], separations: &[f64]) -> Result<EncoderSpace> {
    if thresholds.is_empty() {
        return Err(Error::config("encoder.thresholds: must not be empty"));
    }
    if separations.is_empty() {
        return Err(Error::config("encoder.separations: must not be empty"));
    }
    let mut candidates = Vec::with_capacity(thresholds.len() * separations.len());
    for &h in thresholds {
        for &d in separations {
            candidates.push(EncoderParams::new(h, d)?);
        }
    }
    EncoderSpace::new(candidates)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderRow {
    pub threshold: f64,
    pub min_separation: f64,
    pub mean_loss: f64,
}

impl EncoderRow {
    pub fn params(&self) -> EncoderParams {
        EncoderParams {
            threshold: self.threshold,
            min_separation: self.min_separation,
        }
    }
}

/// Mean detection loss of one encoder candidate over a set of maps.
pub fn mean_encoder_loss(maps: &[PredictedMap], truths: &[PointSet], params: &EncoderParams, tau: f64) -> f64 {
    let total: f64 = maps
        .iter()
        .zip(truths)
        .map(|(m, t)| detection_loss(&encode(m, params), t, tau))
        .sum();
    total / maps.len() as f64
}

/// Exhaustive argmin of the mean detection loss over `space`; the earliest
/// candidate wins ties. Returns the winner and the full table in space order.
pub fn fit_encoder(
    maps: &[PredictedMap],
    truths: &[PointSet],
    space: &EncoderSpace,
    tau: f64,
) -> Result<(EncoderParams, Vec<EncoderRow>)> {
    if maps.len() != truths.len() {
        return Err(Error::shape(format!("{} truth sets", maps.len()), truths.len()));
    }
    if maps.is_empty() {
        return Err(Error::config("encoder fit needs at least one map"));
    }
    // peaks do not depend on the candidate
    let peaks: Vec<Vec<(f64, usize)>> = maps.par_iter().map(local_maxima).collect();
    let table: Vec<EncoderRow> = space
        .candidates()
        .par_iter()
        .map(|c| {
            let total: f64 = peaks
                .iter()
                .zip(maps)
                .zip(truths)
                .map(|((pk, m), t)| detection_loss(&suppress(pk.clone(), c, m.width()), t, tau))
                .sum();
            EncoderRow {
                threshold: c.threshold,
                min_separation: c.min_separation,
                mean_loss: total / maps.len() as f64,
            }
        })
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_loss < table[best].mean_loss {
            best = i;
        }
    }
    Ok((table[best].params(), table))
}

pub fn write_table_csv(path: &std::path::Path, table: &[EncoderRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in table {
        w.serialize(row)?;
    }
    w.flush().map_err(Error::io(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{decode_careful, DecoderParams};
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn map(w: usize, h: usize, v: Vec<f64>) -> PredictedMap {
        PredictedMap::new(w, h, v).unwrap()
    }

    #[test]
    fn zero_map_gives_nothing() {
        let p = EncoderParams::new(0.5, 2.0).unwrap();
        assert!(encode(&map(6, 4, vec![0.0; 24]), &p).is_empty());
    }

    #[test]
    fn single_gaussian_peak() {
        let t = decode_careful(
            &PointSet::from(vec![(3.0, 3.0)]),
            (7, 7),
            &DecoderParams::careful(1.0, 3.0).unwrap(),
        )
        .unwrap();
        let m = PredictedMap::from(t);
        let got = encode(&m, &EncoderParams::new(0.5, 2.0).unwrap());
        assert_eq!(got, PointSet::from(vec![(3.0, 3.0)]));

        // exhaustive scan: (3,3) is the only pixel >= all neighbours and >= 0.5
        let mut maxima = Vec::new();
        for y in 0..7 {
            for x in 0..7 {
                let c = m.get(x, y);
                let ok = (-1i64..=1).all(|dy| {
                    (-1i64..=1).all(|dx| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        nx < 0 || ny < 0 || nx >= 7 || ny >= 7 || m.get(nx as usize, ny as usize) <= c
                    })
                });
                if ok && c >= 0.5 {
                    maxima.push((x, y));
                }
            }
        }
        assert_eq!(maxima, vec![(3, 3)]);
    }

    #[test]
    fn stronger_neighbour_suppresses_weaker() {
        let mut v = vec![0.0; 5 * 5];
        v[2 * 5 + 1] = 0.9;
        v[2 * 5 + 2] = 0.8;
        let got = encode(&map(5, 5, v), &EncoderParams::new(0.5, 2.0).unwrap());
        assert_eq!(got, PointSet::from(vec![(1.0, 2.0)]));
    }

    #[test]
    fn suppression_keeps_the_higher_of_two_peaks() {
        // both are local maxima in the >= sense only if equal-or-higher than
        // neighbours; feed the suppression stage directly
        let cands = vec![(0.8, 2 * 5 + 2), (0.9, 2 * 5 + 1)];
        let kept = suppress(cands, &EncoderParams::new(0.5, 2.0).unwrap(), 5);
        assert_eq!(kept, PointSet::from(vec![(1.0, 2.0)]));
    }

    #[test]
    fn plateau_yields_one_point() {
        let mut v = vec![0.0; 6 * 6];
        for (x, y) in [(2, 2), (3, 2), (2, 3), (3, 3)] {
            v[y * 6 + x] = 0.7;
        }
        let got = encode(&map(6, 6, v), &EncoderParams::new(0.5, 2.0).unwrap());
        assert_eq!(got, PointSet::from(vec![(2.0, 2.0)]));
    }

    #[test]
    fn values_are_clamped() {
        let mut v = vec![-3.0; 5 * 5];
        v[12] = 7.0;
        let got = encode(&map(5, 5, v), &EncoderParams::new(0.99, 1.0).unwrap());
        assert_eq!(got, PointSet::from(vec![(2.0, 2.0)]));
    }

    #[test]
    fn grid_order_and_errors() {
        assert_eq!(encoder_grid(&[0.5], &[2.0]).unwrap().len(), 1);
        let g = encoder_grid(&[0.3, 0.5], &[2.0, 3.0]).unwrap();
        let order: Vec<(f64, f64)> = g.candidates().iter().map(|c| (c.threshold, c.min_separation)).collect();
        assert_eq!(order, vec![(0.3, 2.0), (0.3, 3.0), (0.5, 2.0), (0.5, 3.0)]);
        assert!(encoder_grid(&[0.5, 0.5], &[2.0]).is_err());
        assert!(encoder_grid(&[], &[2.0]).is_err());
        assert!(encoder_grid(&[0.5], &[]).is_err());
        assert!(encoder_grid(&[1.0], &[2.0]).is_err());
        assert!(encoder_grid(&[0.5], &[0.5]).is_err());
    }

    fn random_maps(n: usize, seed: u64) -> (Vec<PredictedMap>, Vec<PointSet>) {
        let mut rng = rng_from_seed(seed);
        let mut maps = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..n {
            let pts: Vec<(f64, f64)> = (0..rng.random_range(0..5))
                .map(|_| (rng.random_range(0..16) as f64, rng.random_range(0..16) as f64))
                .collect();
            let truth = PointSet::from(pts);
            let t = decode_careful(&truth, (16, 16), &DecoderParams::careful(1.5, 4.5).unwrap()).unwrap();
            let noisy: Vec<f64> = t.values().iter().map(|v| v * 0.8 + rng.random_range(-0.1..0.1)).collect();
            maps.push(map(16, 16, noisy));
            truths.push(truth);
        }
        (maps, truths)
    }

    #[test]
    fn fit_encoder_argmin_contract() {
        let (maps, truths) = random_maps(8, 3);
        let single = encoder_grid(&[0.4], &[2.0]).unwrap();
        let (best, table) = fit_encoder(&maps, &truths, &single, 2.0).unwrap();
        assert_eq!(best, single.candidates()[0]);
        assert_eq!(table.len(), 1);

        let space = encoder_grid(&[0.1, 0.3, 0.5, 0.7, 0.9], &[1.0, 2.0, 4.0]).unwrap();
        let (best, table) = fit_encoder(&maps, &truths, &space, 2.0).unwrap();
        let best_row = table.iter().find(|r| r.params() == best).unwrap();
        assert!(table.iter().all(|r| best_row.mean_loss <= r.mean_loss));
        let first = table.iter().position(|r| r.mean_loss == best_row.mean_loss).unwrap();
        assert_eq!(table[first].params(), best);
        for row in &table {
            let again = mean_encoder_loss(&maps, &truths, &row.params(), 2.0);
            assert!((again - row.mean_loss).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_go_to_the_earliest_candidate() {
        // every candidate recovers the lone peak exactly
        let t = decode_careful(&PointSet::from(vec![(4.0, 4.0)]), (9, 9), &DecoderParams::careful(1.0, 3.0).unwrap()).unwrap();
        let maps = vec![PredictedMap::from(t)];
        let truths = vec![PointSet::from(vec![(4.0, 4.0)])];
        let space = encoder_grid(&[0.6, 0.2], &[3.0, 2.0]).unwrap();
        let (best, table) = fit_encoder(&maps, &truths, &space, 1.0).unwrap();
        assert!(table.iter().all(|r| r.mean_loss == 0.0));
        assert_eq!(best, EncoderParams::new(0.6, 3.0).unwrap());
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_points(
            vals in proptest::collection::vec(-0.2f64..1.2, 100),
            h1 in 0.01f64..0.98, dh in 0.0f64..0.5, sep in 1.0f64..4.0,
        ) {
            let m = map(10, 10, vals);
            let h2 = (h1 + dh).min(0.99);
            let lo = encode(&m, &EncoderParams::new(h1, sep).unwrap());
            let hi = encode(&m, &EncoderParams::new(h2, sep).unwrap());
            prop_assert!(hi.len() <= lo.len());
            for (i, p) in lo.iter().enumerate() {
                for q in &lo.points[i + 1..] {
                    prop_assert!(p.dist(q) >= sep);
                }
            }
        }
    }
}
