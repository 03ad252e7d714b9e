//! The seven prior mutations. Each takes a [`StreamKey`] scoped to one
//! `(master_seed, frame, mutation index)` and derives per-feature streams
//! from it, so draws never depend on evaluation order.

use crate::error::{Error, Result};
use crate::map_model::{apply_rigid_transform, ClassTable, MapFeature, MapFrame};
use crate::rng::StreamKey;
use crate::scalar::Scalar;

use super::perlin::{fbm_warp_field, PerlinParams};

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("standard deviation {sigma} must be finite and >= 0")))
    }
}

/// Removes each feature independently with probability `p`.
pub fn drop_features<T: Scalar>(frame: &MapFrame<T>, p: f64, key: StreamKey) -> Result<MapFrame<T>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(frame.clone());
    }
    let kept = frame
        .features
        .iter()
        .enumerate()
        .filter(|(i, _)| !key.feature(*i).stream().bernoulli(p))
        .map(|(_, f)| f.clone())
        .collect();
    Ok(frame.with_features(kept))
}

/// Appends an exact copy right after each feature with probability `p`,
/// stopping once the frame holds `m_max` features.
pub fn duplicate_features<T: Scalar>(
    frame: &MapFrame<T>,
    p: f64,
    m_max: usize,
    key: StreamKey,
) -> Result<MapFrame<T>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(frame.clone());
    }
    let mut budget = m_max.saturating_sub(frame.features.len());
    let mut out = Vec::with_capacity(frame.features.len() + budget.min(frame.features.len()));
    for (i, f) in frame.features.iter().enumerate() {
        out.push(f.clone());
        if key.feature(i).stream().bernoulli(p) && budget > 0 {
            out.push(f.clone());
            budget -= 1;
        }
    }
    Ok(frame.with_features(out))
}

/// With probability `p`, relabels a feature with a uniformly drawn different
/// real class and updates its invariance from `table`. Geometry is kept.
pub fn corrupt_class<T: Scalar>(
    frame: &MapFrame<T>,
    p: f64,
    table: &ClassTable,
    key: StreamKey,
) -> Result<MapFrame<T>> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(frame.clone());
    }
    let classes = table.classes();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(
            "wrong-class mutation needs at least two real classes".into(),
        ));
    }
    let features = frame
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut stream = key.feature(i).stream();
            if !stream.bernoulli(p) {
                return f.clone();
            }
            let others: Vec<_> = classes.iter().filter(|&&c| c != f.feature_class).copied().collect();
            let class = others[stream.below(others.len())];
            MapFeature {
                feature_class: class,
                invariance: table.invariance(class),
                ..f.clone()
            }
        })
        .collect();
    Ok(frame.with_features(features))
}

/// Independent N(0, σ²) offset on every coordinate of every control point.
pub fn jitter_control_points<T: Scalar>(frame: &MapFrame<T>, sigma: f64, key: StreamKey) -> Result<MapFrame<T>> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let features = frame
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut stream = key.feature(i).stream();
            let points = f
                .points
                .iter()
                .map(|p| {
                    let dx = stream.normal(sigma);
                    let dy = stream.normal(sigma);
                    p.translate(T::lit(dx), T::lit(dy))
                })
                .collect();
            MapFeature { points, ..f.clone() }
        })
        .collect();
    Ok(frame.with_features(features))
}

/// Per-feature translation drawn once from N(0, σ²) on each axis.
pub fn shift_features<T: Scalar>(frame: &MapFrame<T>, sigma: f64, key: StreamKey) -> Result<MapFrame<T>> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let features = frame
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut stream = key.feature(i).stream();
            let (dx, dy) = (T::lit(stream.normal(sigma)), T::lit(stream.normal(sigma)));
            MapFeature {
                points: f.points.iter().map(|p| p.translate(dx, dy)).collect(),
                ..f.clone()
            }
        })
        .collect();
    Ok(frame.with_features(features))
}

/// The frame-level draw `(dx, dy, dyaw_radians)` used by [`localization_noise`].
pub fn localization_draw(sigma_xy: f64, sigma_yaw_deg: f64, key: StreamKey) -> Result<(f64, f64, f64)> {
    check_sigma(sigma_xy)?;
    check_sigma(sigma_yaw_deg)?;
    let mut stream = key.frame().stream();
    let dx = stream.normal(sigma_xy);
    let dy = stream.normal(sigma_xy);
    let dyaw = stream.normal(sigma_yaw_deg).to_radians();
    Ok((dx, dy, dyaw))
}

/// One global rigid motion per frame, simulating ego localization error.
pub fn localization_noise<T: Scalar>(
    frame: &MapFrame<T>,
    sigma_xy: f64,
    sigma_yaw_deg: f64,
    key: StreamKey,
) -> Result<MapFrame<T>> {
    let (dx, dy, dyaw) = localization_draw(sigma_xy, sigma_yaw_deg, key)?;
    if sigma_xy == 0.0 && sigma_yaw_deg == 0.0 {
        return Ok(frame.clone());
    }
    Ok(apply_rigid_transform(frame, T::lit(dx), T::lit(dy), T::lit(dyaw)))
}

/// Seed of the warp field used for a frame.
pub fn warp_seed(key: StreamKey) -> u64 {
    key.frame().stream().next_u64()
}

/// Displaces every control point by one frame-wide fBm warp field.
pub fn perlin_warp<T: Scalar>(
    frame: &MapFrame<T>,
    sigma: f64,
    params: &PerlinParams,
    key: StreamKey,
) -> Result<MapFrame<T>> {
    check_sigma(sigma)?;
    params.validate()?;
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let field = fbm_warp_field(params, sigma, warp_seed(key), frame.fov_side.as_f64())?;
    let features = frame
        .features
        .iter()
        .map(|f| MapFeature {
            points: f.points.iter().map(|p| field.warp_point(p)).collect(),
            ..f.clone()
        })
        .collect();
    Ok(frame.with_features(features))
}
