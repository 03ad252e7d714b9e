//! Chamfer-distance average precision over predicted map frames.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::{resample_polyline, ControlPoint, FeatureClass, MapFeature, MapFrame};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Chamfer thresholds in meters, strictly increasing.
    pub thresholds: Vec<f64>,
    pub classes: Vec<FeatureClass>,
    /// Predictions scoring below this are discarded before matching.
    pub score_floor: f64,
    /// Resample both sides to this many points before measuring distance.
    pub densify: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.5, 1.0, 1.5],
            classes: FeatureClass::REAL.to_vec(),
            score_floor: 0.05,
            densify: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::InvalidParameter("at least one threshold is required".into()));
        }
        if self.thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter("thresholds must be positive".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("thresholds must be strictly increasing".into()));
        }
        if self.classes.iter().any(|c| !c.is_real()) {
            return Err(Error::InvalidParameter("no_object cannot be evaluated".into()));
        }
        if let Some(n) = self.densify {
            if n < 2 {
                return Err(Error::InvalidParameter("densify needs at least 2 points".into()));
            }
        }
        Ok(())
    }
}

fn mean_nearest<T: Scalar>(from: &[ControlPoint<T>], to: &[ControlPoint<T>]) -> T {
    let sum = from.iter().fold(T::zero(), |acc, p| {
        let nearest = to.iter().map(|q| p.dist(q)).fold(T::infinity(), T::min);
        acc + nearest
    });
    sum / T::from_usize(from.len()).unwrap()
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-point distances.
pub fn chamfer_distance<T: Scalar>(a: &MapFeature<T>, b: &MapFeature<T>) -> T {
    chamfer_points(&a.points, &b.points)
}

pub fn chamfer_points<T: Scalar>(a: &[ControlPoint<T>], b: &[ControlPoint<T>]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::infinity();
    }
    let two = T::one() + T::one();
    (mean_nearest(a, b) + mean_nearest(b, a)) / two
}

/// Outcome of matching one frame's predictions of one class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMatches {
    /// `(confidence, is_true_positive)` in descending confidence order.
    pub scored: Vec<(f64, bool)>,
    pub false_negatives: usize,
}

impl FrameMatches {
    pub fn true_positives(&self) -> usize {
        self.scored.iter().filter(|(_, tp)| *tp).count()
    }

    pub fn false_positives(&self) -> usize {
        self.scored.len() - self.true_positives()
    }
}

/// Greedy one-to-one matching: predictions in descending confidence each
/// take the nearest unmatched ground truth within `tau`, else count as false
/// positives. Ties in confidence keep input order; ties in distance pick
/// the lower ground-truth index.
pub fn match_predictions<T: Scalar>(preds: &[&MapFeature<T>], gts: &[&MapFeature<T>], tau: T) -> FrameMatches {
    match_with_distances(preds, gts.len(), tau, |p, g| chamfer_distance(preds[p], gts[g]))
}

fn match_with_distances<T: Scalar, F>(preds: &[&MapFeature<T>], n_gt: usize, tau: T, dist: F) -> FrameMatches
where
    F: Fn(usize, usize) -> T,
{
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .partial_cmp(&preds[a].confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; n_gt];
    let mut scored = Vec::with_capacity(preds.len());
    for p in order {
        let mut best: Option<(T, usize)> = None;
        for (g, used) in taken.iter().enumerate() {
            if *used {
                continue;
            }
            let d = dist(p, g);
            if d <= tau && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, g));
            }
        }
        if let Some((_, g)) = best {
            taken[g] = true;
        }
        scored.push((preds[p].confidence.as_f64(), best.is_some()));
    }
    FrameMatches {
        scored,
        false_negatives: taken.iter().filter(|t| !**t).count(),
    }
}

/// All-points interpolated AP: area under the precision envelope, with
/// recall measured against `n_gt`. `None` when there is no ground truth.
///
/// Entries must already be in ranking order (descending confidence).
pub fn average_precision(ranked: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut precision = Vec::with_capacity(ranked.len());
    let mut recall = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &hit) in ranked.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..ranked.len() {
        if recall[k] > prev_recall {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    Some(ap)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: FeatureClass,
    pub num_gt: usize,
    pub num_pred: usize,
    /// AP per threshold; `None` when the class has no ground truth.
    pub ap: Vec<Option<f64>>,
    pub mean_ap: Option<f64>,
    pub counts: Vec<MatchCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub classes: Vec<ClassReport>,
    /// Mean over evaluable classes of the per-class mean over thresholds.
    pub map: Option<f64>,
    pub num_frames: usize,
}

impl EvalReport {
    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!("{:<14} {:>6}", "class", "gt");
        for t in &self.thresholds {
            out.push_str(&format!(" {:>8}", format!("AP@{t}")));
        }
        out.push_str(&format!(" {:>8}\n", "mean"));
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        for c in &self.classes {
            out.push_str(&format!("{:<14} {:>6}", c.class.name(), c.num_gt));
            for ap in &c.ap {
                out.push_str(&format!(" {:>8}", fmt(*ap)));
            }
            out.push_str(&format!(" {:>8}\n", fmt(c.mean_ap)));
        }
        out.push_str(&format!("mAP {}\n", fmt(self.map)));
        out
    }
}

/// Pairs prediction and ground-truth frames by id.
pub fn pair_frames<'a, T: Scalar>(
    preds: &'a [MapFrame<T>],
    gts: &'a [MapFrame<T>],
) -> Result<Vec<(&'a MapFrame<T>, &'a MapFrame<T>)>> {
    let pred_ids: BTreeMap<&str, &MapFrame<T>> = preds.iter().map(|f| (f.frame_id.as_str(), f)).collect();
    let gt_ids: BTreeSet<&str> = gts.iter().map(|f| f.frame_id.as_str()).collect();
    let missing_pred: Vec<&str> = gt_ids.iter().copied().filter(|id| !pred_ids.contains_key(id)).collect();
    let missing_gt: Vec<&str> = pred_ids.keys().copied().filter(|id| !gt_ids.contains(id)).collect();
    if !missing_pred.is_empty() || !missing_gt.is_empty() || pred_ids.len() != preds.len() || gt_ids.len() != gts.len() {
        return Err(Error::FramePairing {
            missing_pred: missing_pred.join(", "),
            missing_gt: missing_gt.join(", "),
        });
    }
    Ok(gts.iter().map(|g| (pred_ids[g.frame_id.as_str()], g)).collect())
}

/// Per class: kept predictions, ground-truth count, prediction-by-GT Chamfer.
type ClassCell<T> = (Vec<MapFeature<T>>, usize, Vec<Vec<T>>);

/// One ranked detection in the dataset-wide list.
struct Ranked {
    confidence: f64,
    frame: usize,
    rank: usize,
    tp: bool,
}

/// Evaluates every class at every threshold. Frames are paired by id, so
/// frame order does not matter.
pub fn evaluate<T: Scalar>(preds: &[MapFrame<T>], gts: &[MapFrame<T>], config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let mut pairs = pair_frames(preds, gts)?;
    pairs.sort_by(|a, b| a.1.frame_id.cmp(&b.1.frame_id));

    let prepare = |f: &MapFeature<T>| -> MapFeature<T> {
        match config.densify {
            Some(n) => match resample_polyline(&f.points, n, f.is_closed()) {
                Ok(points) => MapFeature { points, ..f.clone() },
                Err(_) => f.clone(),
            },
            None => f.clone(),
        }
    };
    let floor = T::lit(config.score_floor);

    let per_frame: Vec<Vec<ClassCell<T>>> = pairs
        .par_iter()
        .map(|(pf, gf)| {
            config
                .classes
                .iter()
                .map(|&class| {
                    let p: Vec<MapFeature<T>> = pf
                        .features
                        .iter()
                        .filter(|f| f.feature_class == class && f.confidence >= floor)
                        .map(prepare)
                        .collect();
                    let g: Vec<MapFeature<T>> =
                        gf.features.iter().filter(|f| f.feature_class == class).map(prepare).collect();
                    let d: Vec<Vec<T>> = p
                        .iter()
                        .map(|a| g.iter().map(|b| chamfer_distance(a, b)).collect())
                        .collect();
                    (p, g.len(), d)
                })
                .collect()
        })
        .collect();

    let mut classes = Vec::with_capacity(config.classes.len());
    for (ci, &class) in config.classes.iter().enumerate() {
        let num_gt: usize = per_frame.iter().map(|f| f[ci].1).sum();
        let num_pred: usize = per_frame.iter().map(|f| f[ci].0.len()).sum();
        let mut ap = Vec::with_capacity(config.thresholds.len());
        let mut counts = Vec::with_capacity(config.thresholds.len());
        for &tau in &config.thresholds {
            let tau_t = T::lit(tau);
            let mut ranked = Vec::with_capacity(num_pred);
            let mut c = MatchCounts::default();
            for (fi, frame) in per_frame.iter().enumerate() {
                let (p, n_gt, d) = &frame[ci];
                let refs: Vec<&MapFeature<T>> = p.iter().collect();
                let m = match_with_distances(&refs, *n_gt, tau_t, |a, b| d[a][b]);
                c.fn_ += m.false_negatives;
                for (rank, &(confidence, tp)) in m.scored.iter().enumerate() {
                    if tp {
                        c.tp += 1;
                    } else {
                        c.fp += 1;
                    }
                    ranked.push(Ranked { confidence, frame: fi, rank, tp });
                }
            }
            ranked.sort_by(|a, b| {
                b.confidence
                    .partial_cmp(&a.confidence)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.frame.cmp(&b.frame))
                    .then(a.rank.cmp(&b.rank))
            });
            let hits: Vec<bool> = ranked.iter().map(|r| r.tp).collect();
            ap.push(average_precision(&hits, num_gt));
            counts.push(c);
        }
        let mean_ap = if num_gt == 0 {
            None
        } else {
            Some(ap.iter().map(|v| v.unwrap_or(0.0)).sum::<f64>() / ap.len() as f64)
        };
        classes.push(ClassReport {
            class,
            num_gt,
            num_pred,
            ap,
            mean_ap,
            counts,
        });
    }
    let evaluable: Vec<f64> = classes.iter().filter_map(|c| c.mean_ap).collect();
    let map = if evaluable.is_empty() {
        None
    } else {
        Some(evaluable.iter().sum::<f64>() / evaluable.len() as f64)
    };
    Ok(EvalReport {
        thresholds: config.thresholds.clone(),
        classes,
        map,
        num_frames: pairs.len(),
    })
}
