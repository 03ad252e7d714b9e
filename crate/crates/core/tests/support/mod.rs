//! Independent oracles and random instance generators shared by the
//! integration and acceptance tests. Nothing here calls into the code paths
//! it is used to check.
#![allow(dead_code)]

use mapprior::map_model::{ControlPoint, FeatureClass, InvarianceClass};
use mapprior::matching_loss::{LabelSet, Matrix, PredictionSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Explicit n×n permutation matrices generating the valid orderings of a
/// class: the closure of the identity under the class's generators.
pub fn permutation_matrices(class: InvarianceClass, n: usize) -> Vec<Vec<Vec<f64>>> {
    let to_matrix = |perm: &[usize]| {
        let mut m = vec![vec![0.0; n]; n];
        for (k, &src) in perm.iter().enumerate() {
            m[k][src] = 1.0;
        }
        m
    };
    let identity: Vec<usize> = (0..n).collect();
    let mut orbit: Vec<Vec<usize>> = Vec::new();
    let mut frontier = vec![identity];
    while let Some(p) = frontier.pop() {
        if orbit.contains(&p) {
            continue;
        }
        orbit.push(p.clone());
        match class {
            InvarianceClass::DirectedPolyline => {}
            InvarianceClass::UndirectedPolyline => {
                let mut r = p.clone();
                r.reverse();
                frontier.push(r);
            }
            InvarianceClass::Polygon => {
                let mut r = p.clone();
                r.reverse();
                frontier.push(r);
                let mut s = p.clone();
                s.rotate_left(1);
                frontier.push(s);
            }
        }
    }
    orbit.iter().map(|p| to_matrix(p)).collect()
}

/// Applies a permutation matrix to an n×2 point array by matrix product.
pub fn apply_matrix(p: &[Vec<f64>], pts: &[ControlPoint<f64>]) -> Vec<[f64; 2]> {
    p.iter()
        .map(|row| {
            let mut acc = [0.0, 0.0];
            for (w, q) in row.iter().zip(pts) {
                acc[0] += w * q.x;
                acc[1] += w * q.y;
            }
            acc
        })
        .collect()
}

/// Single-class positional matrix by enumeration of explicit permutation
/// matrices.
pub fn p2p_oracle(pred: &PredictionSet<f64>, labels: &LabelSet<f64>, class: InvarianceClass) -> Vec<Vec<f64>> {
    let m = labels.points.len();
    let n = labels.points[0].len();
    let mats = permutation_matrices(class, n);
    let mut out = vec![vec![0.0; m]; m];
    for j in 0..m {
        if labels.classes[j] == FeatureClass::NoObject || labels.invariances[j] != class {
            continue;
        }
        for i in 0..m {
            let mut best = f64::INFINITY;
            for p in &mats {
                let moved = apply_matrix(p, &pred.points[i]);
                let s: f64 = moved
                    .iter()
                    .zip(&labels.points[j])
                    .map(|(a, b)| (a[0] - b.x).abs() + (a[1] - b.y).abs())
                    .sum();
                best = best.min(s);
            }
            out[i][j] = best;
        }
    }
    out
}

/// Minimum over all m! assignments; returns (total, lexicographically first optimum).
pub fn assignment_oracle(cost: &Matrix<f64>) -> (f64, Vec<usize>) {
    let m = cost.rows();
    let mut best = (f64::INFINITY, Vec::new());
    let mut perm: Vec<usize> = (0..m).collect();
    permute(&mut perm, 0, &mut |p| {
        let t: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        if t < best.0 || (t == best.0 && p < best.1.as_slice()) {
            best = (t, p.to_vec());
        }
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

pub fn random_class(r: &mut impl Rng) -> (FeatureClass, InvarianceClass) {
    let inv = [
        InvarianceClass::DirectedPolyline,
        InvarianceClass::UndirectedPolyline,
        InvarianceClass::Polygon,
    ][r.gen_range(0..3)];
    let class = FeatureClass::REAL[r.gen_range(0..4)];
    (class, inv)
}

pub fn random_points(r: &mut impl Rng, n: usize) -> Vec<ControlPoint<f64>> {
    (0..n)
        .map(|_| ControlPoint::new(r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0)))
        .collect()
}

/// Random labels with `real` real rows padded with no-object to `m`.
pub fn random_labels(r: &mut impl Rng, m: usize, real: usize, n: usize) -> LabelSet<f64> {
    let mut labels = LabelSet { points: vec![], classes: vec![], invariances: vec![] };
    for k in 0..m {
        if k < real {
            let (c, inv) = random_class(r);
            labels.points.push(random_points(r, n));
            labels.classes.push(c);
            labels.invariances.push(inv);
        } else {
            labels.points.push(vec![ControlPoint::new(0.0, 0.0); n]);
            labels.classes.push(FeatureClass::NoObject);
            labels.invariances.push(InvarianceClass::DirectedPolyline);
        }
    }
    labels
}

pub fn random_predictions(r: &mut impl Rng, m: usize, n: usize) -> PredictionSet<f64> {
    let mut pred = PredictionSet { points: vec![], class_scores: vec![] };
    for _ in 0..m {
        pred.points.push(random_points(r, n));
        let raw: Vec<f64> = (0..FeatureClass::SLOTS).map(|_| r.gen_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut row = [0.0; FeatureClass::SLOTS];
        for (k, v) in raw.iter().enumerate() {
            row[k] = v / s;
        }
        pred.class_scores.push(row);
    }
    pred
}

/// Predictions that copy `labels` exactly with confident correct classes.
pub fn perfect_predictions(labels: &LabelSet<f64>) -> PredictionSet<f64> {
    let mut pred = PredictionSet { points: labels.points.clone(), class_scores: vec![] };
    for c in &labels.classes {
        let mut row = [0.0; FeatureClass::SLOTS];
        row[c.slot()] = 1.0;
        pred.class_scores.push(row);
    }
    pred
}

/// Scalar focal matching cost written out directly.
pub fn focal_oracle(p: f64, alpha: f64, gamma: f64) -> f64 {
    let p = p.clamp(1e-8, 1.0 - 1e-8);
    alpha * (1.0 - p).powf(gamma) * (-p.ln()) - (1.0 - alpha) * p.powf(gamma) * (-(1.0 - p).ln())
}

/// Per-edge `1 − cos` for a given prediction ordering.
pub fn cosine_oracle(pred: &[[f64; 2]], label: &[ControlPoint<f64>], closed: bool) -> f64 {
    let n = label.len();
    let edges: Vec<(usize, usize)> = (0..n - 1)
        .map(|k| (k, k + 1))
        .chain(if closed { Some((n - 1, 0)) } else { None })
        .collect();
    let total: f64 = edges
        .iter()
        .map(|&(a, b)| {
            let pv = [pred[b][0] - pred[a][0], pred[b][1] - pred[a][1]];
            let lv = [label[b].x - label[a].x, label[b].y - label[a].y];
            let pn = (pv[0] * pv[0] + pv[1] * pv[1]).sqrt();
            let ln = (lv[0] * lv[0] + lv[1] * lv[1]).sqrt();
            if pn == 0.0 || ln == 0.0 {
                1.0
            } else {
                1.0 - (pv[0] * lv[0] + pv[1] * lv[1]) / (pn * ln)
            }
        })
        .sum();
    total / edges.len() as f64
}

/// Symmetric Chamfer by explicit all-pairs distance table.
pub fn chamfer_oracle(a: &[ControlPoint<f64>], b: &[ControlPoint<f64>]) -> f64 {
    let table: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()).collect())
        .collect();
    let row_min: f64 = table.iter().map(|r| r.iter().cloned().fold(f64::MAX, f64::min)).sum();
    let col_min: f64 = (0..b.len())
        .map(|j| table.iter().map(|r| r[j]).fold(f64::MAX, f64::min))
        .sum();
    0.5 * (row_min / a.len() as f64 + col_min / b.len() as f64)
}

/// AP as the sum over each true positive of the best precision reached at
/// or beyond its rank, divided by the ground-truth count.
pub fn ap_oracle(ranked: &[bool], n_gt: usize) -> f64 {
    let precision_at = |k: usize| ranked[..=k].iter().filter(|h| **h).count() as f64 / (k + 1) as f64;
    let mut total = 0.0;
    for k in 0..ranked.len() {
        if ranked[k] {
            total += (k..ranked.len()).map(precision_at).fold(0.0, f64::max);
        }
    }
    total / n_gt as f64
}

/// Greedy matching from an explicit distance table, via repeated selection
/// of the most confident unprocessed prediction.
pub fn greedy_oracle(confidence: &[f64], dist: &[Vec<f64>], tau: f64) -> (Vec<bool>, usize) {
    let n_gt = dist.first().map_or(0, |r| r.len());
    let mut done = vec![false; confidence.len()];
    let mut free = vec![true; n_gt];
    let mut hits = Vec::new();
    for _ in 0..confidence.len() {
        let mut p = usize::MAX;
        for i in 0..confidence.len() {
            if !done[i] && (p == usize::MAX || confidence[i] > confidence[p]) {
                p = i;
            }
        }
        done[p] = true;
        let cand = (0..n_gt)
            .filter(|&g| free[g] && dist[p][g] <= tau)
            .min_by(|&a, &b| dist[p][a].partial_cmp(&dist[p][b]).unwrap().then(a.cmp(&b)));
        if let Some(g) = cand {
            free[g] = false;
        }
        hits.push(cand.is_some());
    }
    (hits, free.iter().filter(|f| **f).count())
}

/// Minimum-cost partial matching by exhaustive search: each old item is
/// either paired with an unused new item within `gate` or left out, at a
/// cost of `gate / 2` per unpaired item on either side.
pub fn partial_matching_oracle(dist: &[Vec<f64>], n_new: usize, gate: f64) -> (f64, Vec<Option<usize>>) {
    fn go(
        i: usize,
        dist: &[Vec<f64>],
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        cost: f64,
        gate: f64,
        best: &mut (f64, Vec<Option<usize>>),
    ) {
        if i == dist.len() {
            let unpaired_new = used.iter().filter(|u| !**u).count() as f64;
            let total = cost + unpaired_new * gate / 2.0;
            if total < best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        cur.push(None);
        go(i + 1, dist, used, cur, cost + gate / 2.0, gate, best);
        cur.pop();
        for j in 0..used.len() {
            if !used[j] && dist[i][j] <= gate {
                used[j] = true;
                cur.push(Some(j));
                go(i + 1, dist, used, cur, cost + dist[i][j], gate, best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, Vec::new());
    go(0, dist, &mut vec![false; n_new], &mut Vec::new(), 0.0, gate, &mut best);
    best
}

/// Connected components of the closed-intersection graph of boxes given as
/// `[min_x, min_y, max_x, max_y]`, each returned as its bounding union.
pub fn box_components(boxes: &[[f64; 4]]) -> Vec<[f64; 4]> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    let touch = |a: &[f64; 4], b: &[f64; 4]| a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3];
    // Merged unions can touch boxes their members do not, so iterate to a
    // fixed point over component hulls.
    loop {
        let mut hull: std::collections::BTreeMap<usize, [f64; 4]> = Default::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            let h = hull.entry(r).or_insert(boxes[i]);
            *h = [h[0].min(boxes[i][0]), h[1].min(boxes[i][1]), h[2].max(boxes[i][2]), h[3].max(boxes[i][3])];
        }
        let roots: Vec<usize> = hull.keys().copied().collect();
        let mut changed = false;
        for a in 0..roots.len() {
            for b in a + 1..roots.len() {
                let (ra, rb) = (find(&mut parent, roots[a]), find(&mut parent, roots[b]));
                if ra != rb && touch(&hull[&roots[a]], &hull[&roots[b]]) {
                    parent[rb] = ra;
                    changed = true;
                }
            }
        }
        if !changed {
            let mut out: Vec<[f64; 4]> = hull.into_values().collect();
            out.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return out;
        }
    }
}
