//! Synthetic prior perturbations and their seeded composition.

pub mod mutations;
pub mod perlin;
pub mod recipe;

pub use mutations::{
    corrupt_class, drop_features, duplicate_features, jitter_control_points, localization_draw,
    localization_noise, perlin_warp, shift_features, warp_seed,
};
pub use perlin::{fbm_warp_field, FbmField, PerlinParams, WarpField};
pub use recipe::{apply_mutation, apply_recipe, MutationSpec, PerturbContext, PerturbRecipe};
