//! Map-version diffing and change-driven scene mining.

mod diff;
mod mine;
mod version;

pub use diff::{change_regions, diff_maps, ChangeReport, DiffParams, FeatureRef, ModifiedPair};
pub use mine::{build_scene_pair, mine_frames, MinedWindow, ScenePair, DEFAULT_WINDOW};
pub use version::{read_map_version, read_trajectory, write_map_version, MapVersion, TimedPose, VersionHeader};
