//! Detection loss between predicted and ground-truth point sets.
//!
//! Points are matched greedily within a distance tolerance `tau`; the loss
//! is `1 - F1` of the resulting counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::PointSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// `(predicted index, truth index)` in acceptance order.
    pub pairs: Vec<(usize, usize)>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Greedy matching: all pairs within `tau`, ascending by distance (ties by
/// predicted index, then truth index), each accepted if both ends are free.
pub fn match_points(g: &PointSet, g_star: &PointSet, tau: f64) -> Matching {
    let tau2 = tau * tau;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in g.iter().enumerate() {
        for (j, q) in g_star.iter().enumerate() {
            let d2 = p.dist2(q);
            if d2 <= tau2 {
                candidates.push((d2, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; g.len()];
    let mut truth_used = vec![false; g_star.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            pairs.push((i, j));
        }
    }
    let tp = pairs.len();
    Matching {
        pairs,
        tp,
        fp: g.len() - tp,
        fn_: g_star.len() - tp,
    }
}

/// `2TP / (2TP + FP + FN)`, defined as 1 when both sets are empty.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

pub fn detection_loss(g: &PointSet, g_star: &PointSet, tau: f64) -> f64 {
    let m = match_points(g, g_star, tau);
    1.0 - f1_from_counts(m.tp, m.fp, m.fn_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub loss: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tau: f64,
}

impl DetectionReport {
    /// Ratios from pooled counts. A ratio with a zero denominator is 1 when
    /// there was nothing to find and nothing found, 0 otherwise.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tau: f64) -> Self {
        let vacuous = tp + fp + fn_ == 0;
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                if vacuous { 1.0 } else { 0.0 }
            } else {
                num as f64 / den as f64
            }
        };
        let f1 = f1_from_counts(tp, fp, fn_);
        Self {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1,
            loss: 1.0 - f1,
            tp,
            fp,
            fn_,
            tau,
        }
    }
}

/// Micro-averaged report: counts are summed over samples before computing
/// the ratios.
pub fn report(g_list: &[PointSet], g_star_list: &[PointSet], tau: f64) -> Result<DetectionReport> {
    if g_list.len() != g_star_list.len() {
        return Err(Error::shape(
            format!("{} predicted label sets", g_star_list.len()),
            g_list.len(),
        ));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, gs) in g_list.iter().zip(g_star_list) {
        let m = match_points(g, gs, tau);
        tp += m.tp;
        fp += m.fp;
        fn_ += m.fn_;
    }
    Ok(DetectionReport::from_counts(tp, fp, fn_, tau))
}

/// Exhaustive maximum-cardinality matching within `tau`. Exponential; only
/// for checking the greedy matcher on small instances.
pub fn optimal_tp(g: &PointSet, g_star: &PointSet, tau: f64) -> usize {
    fn go(i: usize, g: &PointSet, g_star: &PointSet, tau2: f64, used: &mut [bool]) -> usize {
        if i == g.len() {
            return 0;
        }
        // leave prediction i unmatched
        let mut best = go(i + 1, g, g_star, tau2, used);
        for j in 0..g_star.len() {
            if !used[j] && g.points[i].dist2(&g_star.points[j]) <= tau2 {
                used[j] = true;
                best = best.max(1 + go(i + 1, g, g_star, tau2, used));
                used[j] = false;
            }
        }
        best
    }
    let mut used = vec![false; g_star.len()];
    go(0, g, g_star, tau * tau, &mut used)
}
