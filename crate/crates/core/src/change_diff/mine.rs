use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::{clip_to_fov, conform_features, world_to_ego, BoundingBox, ControlPoint, MapFeature, MapFrame, Pose2D};
use crate::scalar::Scalar;

use super::version::{MapVersion, TimedPose};

/// Default scene duration in seconds.
pub const DEFAULT_WINDOW: f64 = 30.0;

/// A mined time window over a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MinedWindow<T = f64> {
    pub start: T,
    pub end: T,
    /// Index of the first pose whose field of view meets a region.
    pub anchor: usize,
    /// Indices of every pose with `start <= t <= end`.
    pub frames: Vec<usize>,
}

/// Finds windows of `window` seconds, each anchored at the first pose
/// (after the previous window closes) whose axis-aligned field-of-view
/// square meets a change region. Yaw is ignored for this test.
pub fn mine_frames<T: Scalar>(
    trajectory: &[TimedPose<T>],
    regions: &[BoundingBox<T>],
    fov_side: T,
    window: T,
) -> Result<Vec<MinedWindow<T>>> {
    if !(window.is_finite() && window > T::zero()) {
        return Err(Error::InvalidParameter("window must be positive".into()));
    }
    if !(fov_side.is_finite() && fov_side > T::zero()) {
        return Err(Error::InvalidParameter("fov_side must be positive".into()));
    }
    if let Some(k) = trajectory.windows(2).position(|w| w[1].t < w[0].t) {
        return Err(Error::InvalidParameter(format!("trajectory is not time-sorted at pose {}", k + 1)));
    }
    let mut out: Vec<MinedWindow<T>> = Vec::new();
    for (k, pose) in trajectory.iter().enumerate() {
        if let Some(w) = out.last_mut() {
            if pose.t <= w.end {
                w.frames.push(k);
                continue;
            }
        }
        let fov = BoundingBox::square(pose.x, pose.y, fov_side);
        if regions.iter().any(|r| r.intersects(&fov)) {
            out.push(MinedWindow {
                start: pose.t,
                end: pose.t + window,
                anchor: k,
                frames: vec![k],
            });
        }
    }
    Ok(out)
}

/// An outdated prior and current labels for one ego pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ScenePair<T = f64> {
    pub frame_id: String,
    pub pose: Pose2D<T>,
    pub prior: MapFrame<T>,
    pub ground_truth: MapFrame<T>,
}

fn crop<T: Scalar>(
    map: &MapVersion<T>,
    pose: &Pose2D<T>,
    fov_side: T,
    n_points: usize,
    frame_id: &str,
) -> Result<MapFrame<T>> {
    let at = ControlPoint::new(pose.x, pose.y);
    if !map.extent.contains(&at) {
        return Err(Error::PoseOutsideExtent {
            x: pose.x.as_f64(),
            y: pose.y.as_f64(),
            version: map.version_id.clone(),
        });
    }
    // The rotated square fits inside the axis-aligned one of side √2·fov.
    let reach = BoundingBox::square(pose.x, pose.y, fov_side * T::SQRT_2());
    let features = map
        .features
        .iter()
        .filter(|f| f.bbox().is_some_and(|b| b.intersects(&reach)))
        .map(|f| MapFeature {
            points: world_to_ego(&f.points, pose.x, pose.y, pose.yaw),
            confidence: T::one(),
            id: None,
            ..f.clone()
        })
        .collect();
    let frame = MapFrame {
        frame_id: frame_id.to_string(),
        ego_pose: *pose,
        fov_side,
        features,
    };
    let clipped = clip_to_fov(&frame, n_points)?;
    let features = conform_features(clipped.features, n_points)?;
    Ok(MapFrame { features, ..clipped })
}

/// Crops both versions into the ego frame at `pose`.
pub fn build_scene_pair<T: Scalar>(
    old: &MapVersion<T>,
    new: &MapVersion<T>,
    pose: Pose2D<T>,
    fov_side: T,
    n_points: usize,
    frame_id: &str,
) -> Result<ScenePair<T>> {
    if !(fov_side.is_finite() && fov_side > T::zero()) {
        return Err(Error::InvalidParameter("fov_side must be positive".into()));
    }
    Ok(ScenePair {
        frame_id: frame_id.to_string(),
        pose,
        prior: crop(old, &pose, fov_side, n_points, frame_id)?,
        ground_truth: crop(new, &pose, fov_side, n_points, frame_id)?,
    })
}
