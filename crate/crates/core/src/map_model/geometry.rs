//! Resampling, rigid transforms, padding and field-of-view clipping.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::types::{
    ControlPoint, FeatureClass, InvarianceClass, MapFeature, MapFrame, ModelDims,
};

/// Total length of the path, including the closing edge when `closed`.
pub fn arc_length<T: Scalar>(points: &[ControlPoint<T>], closed: bool) -> T {
    let mut total = points
        .windows(2)
        .fold(T::zero(), |acc, w| acc + w[0].dist(&w[1]));
    if closed && points.len() > 1 {
        total = total + points[points.len() - 1].dist(&points[0]);
    }
    total
}

/// Resamples a path to `n` points at equal arc-length spacing.
///
/// Open paths keep both endpoints. Closed paths start at the first vertex and
/// spread `n` samples over the full perimeter (closing edge included) without
/// repeating the start.
pub fn resample_polyline<T: Scalar>(
    points: &[ControlPoint<T>],
    n: usize,
    closed: bool,
) -> Result<Vec<ControlPoint<T>>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "resample target must be at least 2 points, got {n}"
        )));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateFeature);
    }
    let mut path: Vec<ControlPoint<T>> = points.to_vec();
    if closed {
        path.push(points[0]);
    }
    let mut cum = Vec::with_capacity(path.len());
    cum.push(T::zero());
    for w in path.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + w[0].dist(&w[1]));
    }
    let total = *cum.last().unwrap();
    if total <= T::zero() || !total.is_finite() {
        return Err(Error::DegenerateFeature);
    }

    let divisions = if closed { n } else { n - 1 };
    let step = total / T::from_usize(divisions).unwrap();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        if k == 0 {
            out.push(path[0]);
            continue;
        }
        if !closed && k == n - 1 {
            out.push(*path.last().unwrap());
            continue;
        }
        let target = step * T::from_usize(k).unwrap();
        while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let p = if seg_len > T::zero() {
            let t = ((target - cum[seg]) / seg_len).max(T::zero()).min(T::one());
            path[seg].lerp(&path[seg + 1], t)
        } else {
            path[seg]
        };
        out.push(p);
    }
    Ok(out)
}

/// Resamples every feature whose point count differs from `n_points`.
/// Features with zero arc length are dropped.
pub fn conform_features<T: Scalar>(
    features: Vec<MapFeature<T>>,
    n_points: usize,
) -> Result<Vec<MapFeature<T>>> {
    let mut out = Vec::with_capacity(features.len());
    for mut f in features {
        if f.points.len() != n_points {
            match resample_polyline(&f.points, n_points, f.is_closed()) {
                Ok(points) => f.points = points,
                Err(Error::DegenerateFeature) => continue,
                Err(e) => return Err(e),
            }
        }
        out.push(f);
    }
    Ok(out)
}

#[inline]
fn rotate_translate<T: Scalar>(p: &ControlPoint<T>, cos: T, sin: T, dx: T, dy: T) -> ControlPoint<T> {
    ControlPoint::new(p.x * cos - p.y * sin + dx, p.x * sin + p.y * cos + dy)
}

/// Rotates every control point by `dyaw` about the ego origin, then
/// translates by `(dx, dy)`. The ego pose is left untouched.
pub fn apply_rigid_transform<T: Scalar>(frame: &MapFrame<T>, dx: T, dy: T, dyaw: T) -> MapFrame<T> {
    if dx == T::zero() && dy == T::zero() && dyaw == T::zero() {
        return frame.clone();
    }
    let (sin, cos) = dyaw.sin_cos();
    let features = frame
        .features
        .iter()
        .map(|f| MapFeature {
            points: f
                .points
                .iter()
                .map(|p| rotate_translate(p, cos, sin, dx, dy))
                .collect(),
            ..f.clone()
        })
        .collect();
    frame.with_features(features)
}

/// Exact inverse of [`apply_rigid_transform`] with the same arguments.
pub fn invert_rigid_transform<T: Scalar>(frame: &MapFrame<T>, dx: T, dy: T, dyaw: T) -> MapFrame<T> {
    if dx == T::zero() && dy == T::zero() && dyaw == T::zero() {
        return frame.clone();
    }
    let (sin, cos) = dyaw.sin_cos();
    let features = frame
        .features
        .iter()
        .map(|f| MapFeature {
            points: f
                .points
                .iter()
                .map(|p| {
                    let (x, y) = (p.x - dx, p.y - dy);
                    ControlPoint::new(x * cos + y * sin, -x * sin + y * cos)
                })
                .collect(),
            ..f.clone()
        })
        .collect();
    frame.with_features(features)
}

/// Maps world-frame points into the ego frame of `(px, py, yaw)`.
pub fn world_to_ego<T: Scalar>(points: &[ControlPoint<T>], px: T, py: T, yaw: T) -> Vec<ControlPoint<T>> {
    let (sin, cos) = yaw.sin_cos();
    points
        .iter()
        .map(|p| {
            let (x, y) = (p.x - px, p.y - py);
            ControlPoint::new(x * cos + y * sin, -x * sin + y * cos)
        })
        .collect()
}

/// Appends no-object slots so the list holds exactly `dims.m_gt` entries.
pub fn pad_to_fixed<T: Scalar>(features: &[MapFeature<T>], dims: &ModelDims) -> Result<Vec<MapFeature<T>>> {
    if features.len() > dims.m_gt {
        return Err(Error::FrameOverflow {
            count: features.len(),
            capacity: dims.m_gt,
        });
    }
    if let Some(index) = features.iter().position(|f| !f.feature_class.is_real()) {
        return Err(Error::AlreadyPadded { index });
    }
    let mut out = features.to_vec();
    out.resize_with(dims.m_gt, || no_object_slot(dims.n_points));
    Ok(out)
}

pub(crate) fn no_object_slot<T: Scalar>(n_points: usize) -> MapFeature<T> {
    MapFeature {
        feature_class: FeatureClass::NoObject,
        invariance: InvarianceClass::DirectedPolyline,
        confidence: T::zero(),
        points: vec![ControlPoint::origin(); n_points],
        id: None,
    }
}

/// Which side of the clip square an intersection landed on.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

fn snap<T: Scalar>(mut p: ControlPoint<T>, edge: Option<Edge>, half: T) -> ControlPoint<T> {
    match edge {
        Some(Edge::Left) => p.x = -half,
        Some(Edge::Right) => p.x = half,
        Some(Edge::Bottom) => p.y = -half,
        Some(Edge::Top) => p.y = half,
        None => {}
    }
    p
}

/// Liang–Barsky clip of segment `a → b` against `[-half, half]²`.
/// Returns entry/exit parameters and the edges responsible for them.
#[allow(clippy::type_complexity)]
fn clip_segment<T: Scalar>(
    a: &ControlPoint<T>,
    b: &ControlPoint<T>,
    half: T,
) -> Option<((T, Option<Edge>), (T, Option<Edge>))> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let mut t0 = (T::zero(), None);
    let mut t1 = (T::one(), None);
    let checks = [
        (-dx, a.x + half, Edge::Left),
        (dx, half - a.x, Edge::Right),
        (-dy, a.y + half, Edge::Bottom),
        (dy, half - a.y, Edge::Top),
    ];
    for (p, q, edge) in checks {
        if p == T::zero() {
            if q < T::zero() {
                return None;
            }
            continue;
        }
        let r = q / p;
        if p < T::zero() {
            if r > t1.0 {
                return None;
            }
            if r > t0.0 {
                t0 = (r, Some(edge));
            }
        } else {
            if r < t0.0 {
                return None;
            }
            if r < t1.0 {
                t1 = (r, Some(edge));
            }
        }
    }
    Some((t0, t1))
}

fn clip_open<T: Scalar>(points: &[ControlPoint<T>], half: T) -> Option<Vec<Vec<ControlPoint<T>>>> {
    if points.len() == 1 {
        let inside = points[0].x.abs() <= half && points[0].y.abs() <= half;
        return if inside { None } else { Some(Vec::new()) };
    }
    let mut runs: Vec<Vec<ControlPoint<T>>> = Vec::new();
    let mut current: Vec<ControlPoint<T>> = Vec::new();
    let mut touched = false;
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        match clip_segment(a, b, half) {
            None => {
                touched = true;
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
            Some(((t0, e0), (t1, e1))) => {
                let p0 = if t0 == T::zero() { *a } else { snap(a.lerp(b, t0), e0, half) };
                let p1 = if t1 == T::one() { *b } else { snap(a.lerp(b, t1), e1, half) };
                if t0 > T::zero() {
                    touched = true;
                    if !current.is_empty() {
                        runs.push(std::mem::take(&mut current));
                    }
                }
                if current.is_empty() {
                    current.push(p0);
                }
                current.push(p1);
                if t1 < T::one() {
                    touched = true;
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    if !touched {
        return None;
    }
    Some(runs)
}

/// Sutherland–Hodgman clip of a closed ring. `None` when fully inside.
fn clip_ring<T: Scalar>(points: &[ControlPoint<T>], half: T) -> Option<Vec<ControlPoint<T>>> {
    if points.iter().all(|p| p.x.abs() <= half && p.y.abs() <= half) {
        return None;
    }
    type Inside<T> = fn(&ControlPoint<T>, T) -> bool;
    let planes: [(Edge, Inside<T>); 4] = [
        (Edge::Left, |p, h| p.x >= -h),
        (Edge::Right, |p, h| p.x <= h),
        (Edge::Bottom, |p, h| p.y >= -h),
        (Edge::Top, |p, h| p.y <= h),
    ];
    let mut ring = points.to_vec();
    for (edge, inside) in planes {
        if ring.is_empty() {
            break;
        }
        let input = std::mem::take(&mut ring);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let cur_in = inside(&cur, half);
            let prev_in = inside(&prev, half);
            if cur_in != prev_in {
                let boundary = match edge {
                    Edge::Left => -half,
                    Edge::Right => half,
                    Edge::Bottom => -half,
                    Edge::Top => half,
                };
                let t = match edge {
                    Edge::Left | Edge::Right => (boundary - prev.x) / (cur.x - prev.x),
                    Edge::Bottom | Edge::Top => (boundary - prev.y) / (cur.y - prev.y),
                };
                ring.push(snap(prev.lerp(&cur, t), Some(edge), half));
            }
            if cur_in {
                ring.push(cur);
            }
        }
    }
    Some(ring)
}

/// Intersects every feature with the field-of-view square.
///
/// Features fully inside are returned untouched. Polylines crossing the
/// boundary are split into one feature per inside run; closed features are
/// clipped as rings. Every clipped piece is resampled to `n_points`, and
/// pieces with no extent are dropped.
pub fn clip_to_fov<T: Scalar>(frame: &MapFrame<T>, n_points: usize) -> Result<MapFrame<T>> {
    let half = frame.half_side();
    let mut features = Vec::with_capacity(frame.features.len());
    for f in &frame.features {
        if f.is_closed() {
            match clip_ring(&f.points, half) {
                None => features.push(f.clone()),
                Some(ring) if ring.len() >= 2 => {
                    match resample_polyline(&ring, n_points, true) {
                        Ok(points) => features.push(MapFeature { points, ..f.clone() }),
                        Err(Error::DegenerateFeature) => {}
                        Err(e) => return Err(e),
                    }
                }
                Some(_) => {}
            }
        } else {
            match clip_open(&f.points, half) {
                None => features.push(f.clone()),
                Some(runs) => {
                    for run in runs {
                        match resample_polyline(&run, n_points, false) {
                            Ok(points) => features.push(MapFeature { points, ..f.clone() }),
                            Err(Error::DegenerateFeature) => {}
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
    }
    Ok(frame.with_features(features))
}
