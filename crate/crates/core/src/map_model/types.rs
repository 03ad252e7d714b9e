use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of control points per feature.
pub const DEFAULT_N_POINTS: usize = 20;
/// Default number of prediction / label slots per frame.
pub const DEFAULT_M_MAX: usize = 50;
/// Default side of the square ego field of view, meters.
pub const DEFAULT_FOV_SIDE: f64 = 90.0;

/// A BEV vertex in meters; `x` forward, `y` left in the ego frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ControlPoint<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> ControlPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn l1(&self, other: &Self) -> T {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn lerp(&self, other: &Self, t: T) -> Self {
        Self::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl<T> From<[T; 2]> for ControlPoint<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T> From<ControlPoint<T>> for [T; 2] {
    fn from(p: ControlPoint<T>) -> Self {
        [p.x, p.y]
    }
}

/// Semantic class of a map feature. `NoObject` exists only in padded slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    LaneCenter,
    LaneDivider,
    RoadBoundary,
    Driveway,
    NoObject,
}

impl FeatureClass {
    pub const REAL: [FeatureClass; 4] = [
        FeatureClass::LaneCenter,
        FeatureClass::LaneDivider,
        FeatureClass::RoadBoundary,
        FeatureClass::Driveway,
    ];

    /// Number of score slots a classifier emits: the real classes plus no-object.
    pub const SLOTS: usize = 5;

    /// Column of this class in a class-score row.
    pub fn slot(self) -> usize {
        match self {
            FeatureClass::LaneCenter => 0,
            FeatureClass::LaneDivider => 1,
            FeatureClass::RoadBoundary => 2,
            FeatureClass::Driveway => 3,
            FeatureClass::NoObject => 4,
        }
    }

    pub fn is_real(self) -> bool {
        self != FeatureClass::NoObject
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureClass::LaneCenter => "lane_center",
            FeatureClass::LaneDivider => "lane_divider",
            FeatureClass::RoadBoundary => "road_boundary",
            FeatureClass::Driveway => "driveway",
            FeatureClass::NoObject => "no_object",
        }
    }
}

/// Symmetry group of a feature's point ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceClass {
    DirectedPolyline,
    UndirectedPolyline,
    Polygon,
}

impl InvarianceClass {
    pub const ALL: [InvarianceClass; 3] = [
        InvarianceClass::DirectedPolyline,
        InvarianceClass::UndirectedPolyline,
        InvarianceClass::Polygon,
    ];

    pub fn is_closed(self) -> bool {
        self == InvarianceClass::Polygon
    }
}

/// Class → invariance lookup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTable {
    pub table: BTreeMap<FeatureClass, InvarianceClass>,
}

impl Default for ClassTable {
    fn default() -> Self {
        let table = BTreeMap::from([
            (FeatureClass::LaneCenter, InvarianceClass::DirectedPolyline),
            (FeatureClass::LaneDivider, InvarianceClass::UndirectedPolyline),
            (FeatureClass::RoadBoundary, InvarianceClass::UndirectedPolyline),
            (FeatureClass::Driveway, InvarianceClass::Polygon),
        ]);
        Self { table }
    }
}

impl ClassTable {
    pub fn invariance(&self, class: FeatureClass) -> InvarianceClass {
        self.table
            .get(&class)
            .copied()
            .unwrap_or(InvarianceClass::DirectedPolyline)
    }

    /// Real classes present in the table, in declaration order.
    pub fn classes(&self) -> Vec<FeatureClass> {
        FeatureClass::REAL
            .iter()
            .copied()
            .filter(|c| self.table.contains_key(c))
            .collect()
    }
}

/// One vectorized map feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MapFeature<T = f64> {
    #[serde(rename = "class")]
    pub feature_class: FeatureClass,
    pub invariance: InvarianceClass,
    /// Defaults to 1 when absent, as in map-version files.
    #[serde(default = "T::one")]
    pub confidence: T,
    pub points: Vec<ControlPoint<T>>,
    /// Stable identifier, only carried by map-version files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl<T: Scalar> MapFeature<T> {
    pub fn new(
        feature_class: FeatureClass,
        invariance: InvarianceClass,
        points: Vec<ControlPoint<T>>,
    ) -> Self {
        Self {
            feature_class,
            invariance,
            confidence: T::one(),
            points,
            id: None,
        }
    }

    /// A feature whose invariance follows `table`.
    pub fn with_class(
        feature_class: FeatureClass,
        table: &ClassTable,
        points: Vec<ControlPoint<T>>,
    ) -> Self {
        Self::new(feature_class, table.invariance(feature_class), points)
    }

    pub fn with_confidence(mut self, confidence: T) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.invariance.is_closed()
    }

    pub fn bbox(&self) -> Option<BoundingBox<T>> {
        BoundingBox::of_points(&self.points)
    }
}

/// Planar pose; yaw is kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Pose2D<T = f64> {
    pub x: T,
    pub y: T,
    pub yaw: T,
}

impl<T: Scalar> Pose2D<T> {
    pub fn new(x: T, y: T, yaw: T) -> Self {
        Self {
            x,
            y,
            yaw: normalize_yaw(yaw),
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_yaw<T: Scalar>(yaw: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    if yaw > -pi && yaw <= pi {
        return yaw;
    }
    let mut w = yaw - two_pi * ((yaw + pi) / two_pi).floor();
    // w is now in [-π, π); map the lower end onto +π.
    if w <= -pi {
        w = w + two_pi;
    }
    if w > pi {
        w = pi;
    }
    w
}

/// An ego-centered scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MapFrame<T = f64> {
    pub frame_id: String,
    pub ego_pose: Pose2D<T>,
    #[serde(default = "default_fov_side")]
    pub fov_side: T,
    pub features: Vec<MapFeature<T>>,
}

fn default_fov_side<T: Scalar>() -> T {
    T::lit(DEFAULT_FOV_SIDE)
}

impl<T: Scalar> MapFrame<T> {
    pub fn new(frame_id: impl Into<String>, features: Vec<MapFeature<T>>) -> Self {
        Self {
            frame_id: frame_id.into(),
            ego_pose: Pose2D::default(),
            fov_side: T::lit(DEFAULT_FOV_SIDE),
            features,
        }
    }

    pub fn half_side(&self) -> T {
        self.fov_side / (T::one() + T::one())
    }

    /// Replaces the feature list, keeping id, pose and field of view.
    pub fn with_features(&self, features: Vec<MapFeature<T>>) -> Self {
        Self {
            frame_id: self.frame_id.clone(),
            ego_pose: self.ego_pose,
            fov_side: self.fov_side,
            features,
        }
    }

    /// Checks the invariants every frame read from disk must satisfy.
    ///
    /// Errors carry a field path such as `features[3].points[1]`.
    pub fn validate(&self) -> Result<()> {
        let fail = |path: String, message: &str| Error::Schema {
            context: format!("frame '{}' at {path}", self.frame_id),
            message: message.to_string(),
        };
        let pose = &self.ego_pose;
        if !(pose.x.is_finite() && pose.y.is_finite() && pose.yaw.is_finite()) {
            return Err(fail("ego_pose".into(), "pose must be finite"));
        }
        if !(self.fov_side.is_finite() && self.fov_side > T::zero()) {
            return Err(fail("fov_side".into(), "field of view must be positive"));
        }
        for (fi, f) in self.features.iter().enumerate() {
            if !f.feature_class.is_real() {
                return Err(fail(
                    format!("features[{fi}].class"),
                    "no_object is reserved for padded slots",
                ));
            }
            if !(f.confidence >= T::zero() && f.confidence <= T::one()) {
                return Err(fail(
                    format!("features[{fi}].confidence"),
                    "confidence must lie in [0, 1]",
                ));
            }
            if f.points.is_empty() {
                return Err(fail(format!("features[{fi}].points"), "feature has no points"));
            }
            if let Some(pi) = f.points.iter().position(|p| !p.is_finite()) {
                return Err(fail(
                    format!("features[{fi}].points[{pi}]"),
                    "control point must be finite",
                ));
            }
        }
        Ok(())
    }
}

/// Tensor shape parameters of the set-prediction head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub m_pred: usize,
    pub m_gt: usize,
    pub n_points: usize,
    pub p_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self::new(DEFAULT_M_MAX, DEFAULT_N_POINTS).expect("defaults are valid")
    }
}

impl ModelDims {
    pub fn new(m: usize, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_points must be at least 2, got {n_points}"
            )));
        }
        Ok(Self {
            m_pred: m,
            m_gt: m,
            n_points,
            p_dim: 2,
        })
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BoundingBox<T = f64> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Square of side `side` centered on `(cx, cy)`.
    pub fn square(cx: T, cy: T, side: T) -> Self {
        let h = side / (T::one() + T::one());
        Self::new(cx - h, cy - h, cx + h, cy + h)
    }

    pub fn of_points(points: &[ControlPoint<T>]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Self::new(first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> T {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> ControlPoint<T> {
        let two = T::one() + T::one();
        ControlPoint::new((self.min_x + self.max_x) / two, (self.min_y + self.max_y) / two)
    }

    pub fn expand(&self, by: T) -> Self {
        Self::new(self.min_x - by, self.min_y - by, self.max_x + by, self.max_y + by)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(
            self.min_x.min(other.min_x),
            self.min_y.min(other.min_y),
            self.max_x.max(other.max_x),
            self.max_y.max(other.max_y),
        )
    }

    /// Closed-set intersection test; touching edges count.
    pub fn intersects(&self, other: &Self) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains(&self, p: &ControlPoint<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}
