use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::chamfer_points;
use crate::map_model::{resample_polyline, BoundingBox, ControlPoint, FeatureClass, DEFAULT_N_POINTS};
use crate::matching_loss::{hungarian_assign, Matrix};
use crate::scalar::Scalar;

use super::version::MapVersion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffParams {
    /// Matched pairs farther apart than this (Chamfer, meters) are modified.
    pub modify_tol: f64,
    /// Pairs farther apart than this are never matched.
    pub match_gate: f64,
    /// Side of the square spatial tiles used to bound geometric matching.
    pub tile: f64,
    /// Margin added around each changed feature's box.
    pub buffer: f64,
    pub n_points: usize,
}

impl Default for DiffParams {
    fn default() -> Self {
        Self {
            modify_tol: 0.25,
            match_gate: 10.0,
            tile: 200.0,
            buffer: 20.0,
            n_points: DEFAULT_N_POINTS,
        }
    }
}

impl DiffParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.modify_tol.is_finite() && self.modify_tol >= 0.0) {
            return Err(Error::InvalidParameter("modify_tol must be non-negative".into()));
        }
        if !positive(self.match_gate) || self.match_gate < self.modify_tol {
            return Err(Error::InvalidParameter("match_gate must be positive and at least modify_tol".into()));
        }
        if !positive(self.tile) {
            return Err(Error::InvalidParameter("tile must be positive".into()));
        }
        if !(self.buffer.is_finite() && self.buffer >= 0.0) {
            return Err(Error::InvalidParameter("buffer must be non-negative".into()));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidParameter("n_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct FeatureRef<T = f64> {
    pub id: String,
    pub index: usize,
    pub class: FeatureClass,
    pub bbox: BoundingBox<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ModifiedPair<T = f64> {
    pub old_id: String,
    pub new_id: String,
    pub old_index: usize,
    pub new_index: usize,
    pub class: FeatureClass,
    pub chamfer: T,
    /// Union of the old and new boxes.
    pub bbox: BoundingBox<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ChangeReport<T = f64> {
    pub old_version: String,
    pub new_version: String,
    pub added: Vec<FeatureRef<T>>,
    pub removed: Vec<FeatureRef<T>>,
    pub modified: Vec<ModifiedPair<T>>,
    pub regions: Vec<BoundingBox<T>>,
}

impl<T: Scalar> ChangeReport<T> {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

/// Geometry prepared for comparison: resampled points and the raw box.
struct Prepared<T> {
    class: FeatureClass,
    points: Vec<ControlPoint<T>>,
    bbox: BoundingBox<T>,
}

fn prepare<T: Scalar>(map: &MapVersion<T>, n_points: usize) -> Vec<Prepared<T>> {
    map.features
        .iter()
        .map(|f| Prepared {
            class: f.feature_class,
            points: resample_polyline(&f.points, n_points, f.is_closed()).unwrap_or_else(|_| f.points.clone()),
            // Features are validated non-empty on read.
            bbox: f.bbox().expect("feature has points"),
        })
        .collect()
}

/// Optimal partial matching between `old` and `new` under Chamfer cost.
/// Leaving a feature unmatched costs half the gate, so a pair is matched
/// only when its distance beats dropping both sides.
fn match_group<T: Scalar>(old: &[&Prepared<T>], new: &[&Prepared<T>], gate: T) -> Result<Vec<(usize, usize, T)>> {
    let (a, b) = (old.len(), new.len());
    if a == 0 || b == 0 {
        return Ok(Vec::new());
    }
    let n = a + b;
    let dist: Vec<Vec<T>> = old
        .iter()
        .map(|o| new.iter().map(|f| chamfer_points(&o.points, &f.points)).collect())
        .collect();
    let half = gate / T::lit(2.0);
    let forbid = gate * T::from_usize(n + 1).unwrap();
    let cost = Matrix::from_fn(n, n, |i, j| match (i < a, j < b) {
        (true, true) if dist[i][j] <= gate => dist[i][j],
        (true, false) if j - b == i => half,
        (false, true) if i - a == j => half,
        (false, false) => T::zero(),
        _ => forbid,
    });
    let assignment = hungarian_assign(&cost)?;
    Ok((0..a)
        .filter_map(|i| {
            let j = assignment.assignment[i];
            (j < b && dist[i][j] <= gate).then(|| (i, j, dist[i][j]))
        })
        .collect())
}

/// Old and new feature indices sharing a class and tile.
type TileGroups = BTreeMap<(FeatureClass, i64, i64), (Vec<usize>, Vec<usize>)>;

fn tile_of<T: Scalar>(bbox: &BoundingBox<T>, tile: f64) -> (i64, i64) {
    let c = bbox.center();
    ((c.x.as_f64() / tile).floor() as i64, (c.y.as_f64() / tile).floor() as i64)
}

/// Diffs two map versions.
///
/// When both maps carry unique ids on every feature, features are paired by
/// id. Otherwise same-class features are matched geometrically within each
/// spatial tile by minimum total Chamfer distance.
pub fn diff_maps<T: Scalar>(old: &MapVersion<T>, new: &MapVersion<T>, params: &DiffParams) -> Result<ChangeReport<T>> {
    params.validate()?;
    if !(old.features.is_empty() || new.features.is_empty()) && !old.extent.intersects(&new.extent) {
        return Err(Error::InvalidParameter(format!(
            "extents of '{}' and '{}' do not overlap",
            old.version_id, new.version_id
        )));
    }
    let po = prepare(old, params.n_points);
    let pn = prepare(new, params.n_points);

    let pairs: Vec<(usize, usize, T)> = if old.has_unique_ids() && new.has_unique_ids() {
        let by_id: HashMap<&str, usize> = new
            .features
            .iter()
            .enumerate()
            .map(|(j, f)| (f.id.as_deref().unwrap(), j))
            .collect();
        old.features
            .iter()
            .enumerate()
            .filter_map(|(i, f)| {
                let j = *by_id.get(f.id.as_deref().unwrap())?;
                Some((i, j, chamfer_points(&po[i].points, &pn[j].points)))
            })
            .collect()
    } else {
        let mut groups = TileGroups::new();
        for (i, p) in po.iter().enumerate() {
            let (tx, ty) = tile_of(&p.bbox, params.tile);
            groups.entry((p.class, tx, ty)).or_default().0.push(i);
        }
        for (j, p) in pn.iter().enumerate() {
            let (tx, ty) = tile_of(&p.bbox, params.tile);
            groups.entry((p.class, tx, ty)).or_default().1.push(j);
        }
        let gate = T::lit(params.match_gate);
        let groups: Vec<_> = groups.into_values().collect();
        let matched: Vec<Vec<(usize, usize, T)>> = groups
            .par_iter()
            .map(|(oi, ni)| {
                let o: Vec<_> = oi.iter().map(|&i| &po[i]).collect();
                let n: Vec<_> = ni.iter().map(|&j| &pn[j]).collect();
                Ok(match_group(&o, &n, gate)?
                    .into_iter()
                    .map(|(a, b, d)| (oi[a], ni[b], d))
                    .collect())
            })
            .collect::<Result<_>>()?;
        matched.into_iter().flatten().collect()
    };

    let mut old_used = vec![false; po.len()];
    let mut new_used = vec![false; pn.len()];
    let tol = T::lit(params.modify_tol);
    let mut modified = Vec::new();
    for &(i, j, d) in &pairs {
        old_used[i] = true;
        new_used[j] = true;
        if d > tol || po[i].class != pn[j].class {
            modified.push(ModifiedPair {
                old_id: old.feature_id(i),
                new_id: new.feature_id(j),
                old_index: i,
                new_index: j,
                class: pn[j].class,
                chamfer: d,
                bbox: po[i].bbox.union(&pn[j].bbox),
            });
        }
    }
    modified.sort_by_key(|m| m.old_index);
    let unmatched = |map: &MapVersion<T>, prep: &[Prepared<T>], used: &[bool]| -> Vec<FeatureRef<T>> {
        (0..prep.len())
            .filter(|&k| !used[k])
            .map(|k| FeatureRef {
                id: map.feature_id(k),
                index: k,
                class: prep[k].class,
                bbox: prep[k].bbox,
            })
            .collect()
    };
    let mut report = ChangeReport {
        old_version: old.version_id.clone(),
        new_version: new.version_id.clone(),
        added: unmatched(new, &pn, &new_used),
        removed: unmatched(old, &po, &old_used),
        modified,
        regions: Vec::new(),
    };
    report.regions = change_regions(&report, T::lit(params.buffer));
    Ok(report)
}

/// Buffered boxes around every change, with overlapping boxes merged until
/// no two touch. Output is sorted by corner coordinates.
pub fn change_regions<T: Scalar>(report: &ChangeReport<T>, buffer: T) -> Vec<BoundingBox<T>> {
    let mut boxes: Vec<BoundingBox<T>> = report
        .added
        .iter()
        .chain(&report.removed)
        .map(|f| f.bbox)
        .chain(report.modified.iter().map(|m| m.bbox))
        .map(|b| b.expand(buffer))
        .collect();
    loop {
        let mut merged = false;
        let mut i = 0;
        while i < boxes.len() {
            let mut j = i + 1;
            while j < boxes.len() {
                if boxes[i].intersects(&boxes[j]) {
                    let other = boxes.swap_remove(j);
                    boxes[i] = boxes[i].union(&other);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            break;
        }
    }
    boxes.sort_by(|a, b| {
        [a.min_x, a.min_y, a.max_x, a.max_y]
            .partial_cmp(&[b.min_x, b.min_y, b.max_x, b.max_y])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    boxes
}
