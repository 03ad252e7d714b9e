//! Pairwise loss matrices and the single-stage matched objective.
//!
//! All matrices are indexed `(prediction i, label j)`. Positional terms are
//! masked to zero in every column whose label is a no-object pad or belongs
//! to a different invariance class than the one being built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::{
    pad_to_fixed, ControlPoint, FeatureClass, InvarianceClass, MapFeature, ModelDims,
};
use crate::scalar::Scalar;

use super::hungarian::hungarian_assign;
use super::matrix::Matrix;
use super::permutations::{valid_permutations, PermutationSet};

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PredictionSet<T = f64> {
    /// `[m_pred][n_points]`.
    pub points: Vec<Vec<ControlPoint<T>>>,
    /// `[m_pred][FeatureClass::SLOTS]`, each row a probability distribution.
    pub class_scores: Vec<[T; FeatureClass::SLOTS]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LabelSet<T = f64> {
    pub points: Vec<Vec<ControlPoint<T>>>,
    pub classes: Vec<FeatureClass>,
    pub invariances: Vec<InvarianceClass>,
}

impl<T: Scalar> PredictionSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pads `features` to `dims.m_pred` slots. A real feature with confidence
    /// `s` scores `s` on its class and `1 - s` on no-object; pad slots score
    /// 1 on no-object.
    pub fn from_features(features: &[MapFeature<T>], dims: &ModelDims) -> Result<Self> {
        let padded = pad_to_fixed(features, &ModelDims { m_gt: dims.m_pred, ..*dims })?;
        let mut points = Vec::with_capacity(padded.len());
        let mut class_scores = Vec::with_capacity(padded.len());
        for f in padded {
            check_point_count(&f, dims.n_points)?;
            let mut row = [T::zero(); FeatureClass::SLOTS];
            if f.feature_class.is_real() {
                row[f.feature_class.slot()] = f.confidence;
                row[FeatureClass::NoObject.slot()] = T::one() - f.confidence;
            } else {
                row[FeatureClass::NoObject.slot()] = T::one();
            }
            points.push(f.points);
            class_scores.push(row);
        }
        Ok(Self { points, class_scores })
    }
}

impl<T: Scalar> LabelSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_features(features: &[MapFeature<T>], dims: &ModelDims) -> Result<Self> {
        let padded = pad_to_fixed(features, dims)?;
        let mut out = Self {
            points: Vec::with_capacity(padded.len()),
            classes: Vec::with_capacity(padded.len()),
            invariances: Vec::with_capacity(padded.len()),
        };
        for f in padded {
            check_point_count(&f, dims.n_points)?;
            out.classes.push(f.feature_class);
            out.invariances.push(f.invariance);
            out.points.push(f.points);
        }
        Ok(out)
    }

    /// Whether column `j` participates in the class-`c` positional matrix.
    pub fn in_class(&self, j: usize, c: InvarianceClass) -> bool {
        self.classes[j].is_real() && self.invariances[j] == c
    }
}

fn check_point_count<T: Scalar>(f: &MapFeature<T>, n_points: usize) -> Result<()> {
    if f.points.len() != n_points {
        return Err(Error::ShapeMismatch(format!(
            "feature has {} control points, expected {n_points}",
            f.points.len()
        )));
    }
    Ok(())
}

/// How the cosine term interacts with the permutation search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineMode {
    /// Cosine is evaluated under the permutation that minimizes the L1 term.
    #[default]
    PostHoc,
    /// The permutation minimizes `L1 + w_cos · cosine` jointly.
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LossWeights<T = f64> {
    pub w_c: T,
    pub w_p: T,
    pub w_cos: T,
    pub focal_alpha: T,
    pub focal_gamma: T,
    pub cosine_mode: CosineMode,
}

impl<T: Scalar> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            w_c: T::one(),
            w_p: T::one(),
            w_cos: T::lit(0.02),
            focal_alpha: T::lit(0.25),
            focal_gamma: T::lit(2.0),
            cosine_mode: CosineMode::PostHoc,
        }
    }
}

impl<T: Scalar> LossWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_c, self.w_p, self.w_cos, self.focal_alpha, self.focal_gamma];
        if all.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
            return Err(Error::InvalidParameter(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn check_shapes<T: Scalar>(pred: &PredictionSet<T>, labels: &LabelSet<T>) -> Result<usize> {
    let m = labels.len();
    if pred.len() != m || pred.class_scores.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels (m_pred must equal m_gt)",
            pred.len(),
            m
        )));
    }
    if labels.classes.len() != m || labels.invariances.len() != m {
        return Err(Error::ShapeMismatch("label arrays differ in length".into()));
    }
    let n = labels.points.first().map_or(0, Vec::len);
    if pred.points.iter().chain(&labels.points).any(|p| p.len() != n) {
        return Err(Error::ShapeMismatch("rows differ in control point count".into()));
    }
    if m > 0 && n < 2 {
        return Err(Error::ShapeMismatch("need at least 2 control points".into()));
    }
    Ok(n)
}

/// Σ_k |x̂[perm[k]] − x[k]|₁ over both coordinates.
fn l1_under<T: Scalar>(pred: &[ControlPoint<T>], label: &[ControlPoint<T>], perm: &[usize]) -> T {
    perm.iter()
        .zip(label)
        .fold(T::zero(), |acc, (&a, x)| acc + pred[a].l1(x))
}

/// Mean of `1 − cos θ` between corresponding edges. Closed features include
/// the wrap-around edge. Zero-length edges count as fully misaligned.
fn cosine_under<T: Scalar>(
    pred: &[ControlPoint<T>],
    label: &[ControlPoint<T>],
    perm: &[usize],
    closed: bool,
) -> T {
    let n = label.len();
    let edges = if closed { n } else { n - 1 };
    let mut sum = T::zero();
    for k in 0..edges {
        let k1 = (k + 1) % n;
        let (pa, pb) = (pred[perm[k]], pred[perm[k1]]);
        let (la, lb) = (label[k], label[k1]);
        let (px, py) = (pb.x - pa.x, pb.y - pa.y);
        let (lx, ly) = (lb.x - la.x, lb.y - la.y);
        let pn = px.hypot(py);
        let ln = lx.hypot(ly);
        let penalty = if pn > T::zero() && ln > T::zero() {
            T::one() - (px * lx + py * ly) / (pn * ln)
        } else {
            T::one()
        };
        sum = sum + penalty;
    }
    sum / T::from_usize(edges).unwrap()
}

/// Positional terms for one `(pred, label)` pair under the selected permutation.
#[derive(Clone, Copy, Debug)]
struct PairTerms<T> {
    l1: T,
    cosine: T,
}

fn best_pair<T: Scalar>(
    pred: &[ControlPoint<T>],
    label: &[ControlPoint<T>],
    perms: &PermutationSet,
    joint_cos_weight: Option<T>,
) -> PairTerms<T> {
    let closed = perms.invariance.is_closed();
    let mut best: Option<(T, PairTerms<T>)> = None;
    for perm in &perms.perms {
        let l1 = l1_under(pred, label, perm);
        let (key, cosine) = match joint_cos_weight {
            Some(w) => {
                let c = cosine_under(pred, label, perm, closed);
                (l1 + w * c, Some(c))
            }
            None => (l1, None),
        };
        if best.as_ref().is_none_or(|(b, _)| key < *b) {
            let cosine = cosine.unwrap_or_else(T::zero);
            best = Some((key, PairTerms { l1, cosine }));
        }
    }
    let (_, mut terms) = best.expect("permutation sets are never empty");
    if joint_cos_weight.is_none() {
        // Recover the cosine term under the L1 winner.
        let winner = perms
            .perms
            .iter()
            .find(|p| l1_under(pred, label, p) == terms.l1)
            .expect("winner is in the set");
        terms.cosine = cosine_under(pred, label, winner, closed);
    }
    terms
}

/// Positional matrices restricted to labels of class `only` (all classes when `None`).
fn positional<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
    only: Option<InvarianceClass>,
    joint_cos_weight: Option<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let n = check_shapes(pred, labels)?;
    let m = labels.len();
    let sets: Vec<PermutationSet> = InvarianceClass::ALL
        .iter()
        .map(|&c| valid_permutations(c, n))
        .collect();
    let mut l1 = Matrix::filled(m, m, T::zero());
    let mut cos = Matrix::filled(m, m, T::zero());
    for j in 0..m {
        let c = labels.invariances[j];
        if !labels.classes[j].is_real() || only.is_some_and(|o| o != c) {
            continue;
        }
        let set = sets.iter().find(|s| s.invariance == c).unwrap();
        for i in 0..m {
            let t = best_pair(&pred.points[i], &labels.points[j], set, joint_cos_weight);
            l1[(i, j)] = t.l1;
            cos[(i, j)] = t.cosine;
        }
    }
    Ok((l1, cos))
}

/// Point-to-point L1 matrix for one invariance class, minimized over that
/// class's valid permutations of the prediction.
pub fn p2p_matrix<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
    class: InvarianceClass,
) -> Result<Matrix<T>> {
    positional(pred, labels, Some(class), None).map(|(l1, _)| l1)
}

/// Sum of the three class matrices. The masks partition the label columns,
/// so each column equals exactly one class matrix's column.
pub fn p2p_total<T: Scalar>(pred: &PredictionSet<T>, labels: &LabelSet<T>) -> Result<Matrix<T>> {
    let mut total: Option<Matrix<T>> = None;
    for c in InvarianceClass::ALL {
        let part = p2p_matrix(pred, labels, c)?;
        total = Some(match total {
            None => part,
            Some(acc) => acc.zip_with(&part, |a, b| a + b),
        });
    }
    Ok(total.expect("three classes"))
}

/// Edge-direction penalty under the L1-selected permutation.
pub fn cosine_penalty_matrix<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
) -> Result<Matrix<T>> {
    positional(pred, labels, None, None).map(|(_, cos)| cos)
}

/// Focal matching cost of a single probability for the target class.
pub fn focal_cost<T: Scalar>(p: T, alpha: T, gamma: T) -> T {
    let eps = T::lit(PROB_EPS);
    let p = p.max(eps).min(T::one() - eps);
    let one = T::one();
    let positive = alpha * (one - p).powf(gamma) * -p.ln();
    let negative = (one - alpha) * p.powf(gamma) * -(one - p).ln();
    positive - negative
}

/// `(i, j)` = focal cost of prediction `i`'s score for label `j`'s class
/// (the no-object score for pad columns).
pub fn focal_matrix<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
    alpha: T,
    gamma: T,
) -> Result<Matrix<T>> {
    let m = labels.len();
    if pred.class_scores.len() != m || labels.classes.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} score rows vs {} labels",
            pred.class_scores.len(),
            m
        )));
    }
    Ok(Matrix::from_fn(m, m, |i, j| {
        focal_cost(pred.class_scores[i][labels.classes[j].slot()], alpha, gamma)
    }))
}

/// The combined cost and its components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LossMatrices<T = f64> {
    pub focal: Matrix<T>,
    pub p2p: Matrix<T>,
    pub cosine: Matrix<T>,
    pub combined: Matrix<T>,
}

/// `w_c · focal + w_p · (p2p + w_cos · cosine)`.
pub fn combined_matrix<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
    weights: &LossWeights<T>,
) -> Result<LossMatrices<T>> {
    weights.validate()?;
    let joint = match weights.cosine_mode {
        CosineMode::PostHoc => None,
        CosineMode::Joint => Some(weights.w_cos),
    };
    let (p2p, cosine) = positional(pred, labels, None, joint)?;
    let focal = focal_matrix(pred, labels, weights.focal_alpha, weights.focal_gamma)?;
    let m = labels.len();
    let combined = Matrix::from_fn(m, m, |i, j| {
        weights.w_c * focal[(i, j)]
            + weights.w_p * (p2p[(i, j)] + weights.w_cos * cosine[(i, j)])
    });
    Ok(LossMatrices {
        focal,
        p2p,
        cosine,
        combined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PairLoss<T = f64> {
    pub pred: usize,
    pub label: usize,
    pub label_class: FeatureClass,
    pub focal: T,
    pub p2p: T,
    pub cosine: T,
    pub combined: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MatchResult<T = f64> {
    /// `assignment[prediction] = label`.
    pub assignment: Vec<usize>,
    pub total_loss: T,
    /// Unweighted sums of the matched component entries.
    pub focal_total: T,
    pub p2p_total: T,
    pub cosine_total: T,
    pub pairs: Vec<PairLoss<T>>,
}

/// One Hungarian matching on the combined matrix, summing matched entries.
pub fn matched_loss<T: Scalar>(
    pred: &PredictionSet<T>,
    labels: &LabelSet<T>,
    weights: &LossWeights<T>,
) -> Result<MatchResult<T>> {
    let mats = combined_matrix(pred, labels, weights)?;
    let assign = hungarian_assign(&mats.combined)?;
    let mut pairs = Vec::with_capacity(assign.assignment.len());
    let (mut focal_total, mut p2p_total, mut cosine_total) = (T::zero(), T::zero(), T::zero());
    for (i, &j) in assign.assignment.iter().enumerate() {
        let pair = PairLoss {
            pred: i,
            label: j,
            label_class: labels.classes[j],
            focal: mats.focal[(i, j)],
            p2p: mats.p2p[(i, j)],
            cosine: mats.cosine[(i, j)],
            combined: mats.combined[(i, j)],
        };
        focal_total = focal_total + pair.focal;
        p2p_total = p2p_total + pair.p2p;
        cosine_total = cosine_total + pair.cosine;
        pairs.push(pair);
    }
    Ok(MatchResult {
        assignment: assign.assignment,
        total_loss: assign.total,
        focal_total,
        p2p_total,
        cosine_total,
        pairs,
    })
}
