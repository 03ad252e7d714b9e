//! Geometric data model shared by every pipeline stage.

pub mod geometry;
pub mod io;
pub mod types;

pub use geometry::{
    apply_rigid_transform, arc_length, clip_to_fov, conform_features, invert_rigid_transform,
    pad_to_fixed, resample_polyline, world_to_ego,
};
pub use io::{read_scenes, write_scenes};
pub use types::{
    normalize_yaw, BoundingBox, ClassTable, ControlPoint, FeatureClass, InvarianceClass, MapFeature, MapFrame,
    ModelDims, Pose2D, DEFAULT_FOV_SIDE, DEFAULT_M_MAX, DEFAULT_N_POINTS,
};
