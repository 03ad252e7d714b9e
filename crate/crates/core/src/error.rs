use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate feature: polyline has zero arc length")]
    DegenerateFeature,

    #[error("frame overflow: {count} features exceed capacity {capacity}")]
    FrameOverflow { count: usize, capacity: usize },

    #[error("input is already padded: slot {index} carries a no-object class")]
    AlreadyPadded { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame pairing mismatch: missing predictions for [{missing_pred}], missing ground truth for [{missing_gt}]")]
    FramePairing {
        missing_pred: String,
        missing_gt: String,
    },

    #[error("pose ({x}, {y}) lies outside the extent of map version '{version}'")]
    PoseOutsideExtent { x: f64, y: f64, version: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context}: {message}")]
    Schema { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
