use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::io::{parse_record, write_record};
use crate::map_model::{normalize_yaw, BoundingBox, MapFeature};
use crate::scalar::Scalar;

/// A world-frame map snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct MapVersion<T = f64> {
    pub version_id: String,
    pub extent: BoundingBox<T>,
    pub features: Vec<MapFeature<T>>,
}

/// First record of a map-version file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct VersionHeader<T = f64> {
    pub version_id: String,
    pub extent: BoundingBox<T>,
}

impl<T: Scalar> MapVersion<T> {
    pub fn new(version_id: impl Into<String>, extent: BoundingBox<T>, features: Vec<MapFeature<T>>) -> Self {
        Self {
            version_id: version_id.into(),
            extent,
            features,
        }
    }

    /// True when every feature carries an id and no id repeats.
    pub fn has_unique_ids(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.features
            .iter()
            .all(|f| f.id.as_deref().is_some_and(|id| seen.insert(id)))
    }

    /// The feature's id, or its index when it has none.
    pub fn feature_id(&self, index: usize) -> String {
        self.features[index].id.clone().unwrap_or_else(|| index.to_string())
    }
}

fn check_feature<T: Scalar>(f: &MapFeature<T>) -> std::result::Result<(), String> {
    if !f.feature_class.is_real() {
        return Err("no_object is reserved for padded slots".into());
    }
    if f.points.is_empty() {
        return Err("feature has no points".into());
    }
    if let Some(i) = f.points.iter().position(|p| !p.is_finite()) {
        return Err(format!("points[{i}] is not finite"));
    }
    Ok(())
}

/// Reads a header line followed by one feature per line.
pub fn read_map_version<T: Scalar>(reader: impl BufRead) -> Result<MapVersion<T>> {
    let mut header: Option<VersionHeader<T>> = None;
    let mut features = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: VersionHeader<T> = parse_record(i + 1, &line)?;
            let e = &h.extent;
            let finite = [e.min_x, e.min_y, e.max_x, e.max_y].iter().all(|v| v.is_finite());
            if !finite || e.min_x > e.max_x || e.min_y > e.max_y {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "extent must be a finite, non-inverted box".into(),
                });
            }
            header = Some(h);
            continue;
        }
        let f: MapFeature<T> = parse_record(i + 1, &line)?;
        check_feature(&f).map_err(|message| Error::Parse { line: i + 1, message })?;
        features.push(f);
    }
    let header = header.ok_or_else(|| Error::Schema {
        context: "map version".into(),
        message: "missing header record".into(),
    })?;
    Ok(MapVersion {
        version_id: header.version_id,
        extent: header.extent,
        features,
    })
}

pub fn write_map_version<T: Scalar>(mut writer: impl Write, map: &MapVersion<T>) -> Result<()> {
    let header = VersionHeader {
        version_id: map.version_id.clone(),
        extent: map.extent,
    };
    write_record(&mut writer, &header)?;
    for f in &map.features {
        write_record(&mut writer, f)?;
    }
    Ok(())
}

/// A timestamped world-frame pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct TimedPose<T = f64> {
    /// Seconds.
    pub t: T,
    pub x: T,
    pub y: T,
    #[serde(default = "T::zero")]
    pub yaw: T,
}

/// Reads one pose per line. Timestamps are required and must not decrease.
pub fn read_trajectory<T: Scalar>(reader: impl BufRead) -> Result<Vec<TimedPose<T>>> {
    let mut out: Vec<TimedPose<T>> = Vec::new();
    for (line, mut pose) in crate::map_model::io::read_records::<TimedPose<T>>(reader)? {
        if ![pose.t, pose.x, pose.y, pose.yaw].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "pose values must be finite".into(),
            });
        }
        if out.last().is_some_and(|p| pose.t < p.t) {
            return Err(Error::Parse {
                line,
                message: "trajectory is not sorted by time".into(),
            });
        }
        pose.yaw = normalize_yaw(pose.yaw);
        out.push(pose);
    }
    Ok(out)
}
