//! Vectorized HD map prior tooling: synthetic prior perturbation, the
//! single-stage permutation-invariant matching loss, Chamfer mAP evaluation
//! and map-version change mining.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod change_diff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod map_model;
pub mod matching_loss;
pub mod perturb;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ControlPoint64 = map_model::ControlPoint<f64>;
pub type ControlPoint32 = map_model::ControlPoint<f32>;
pub type MapFeature64 = map_model::MapFeature<f64>;
pub type MapFeature32 = map_model::MapFeature<f32>;
pub type MapFrame64 = map_model::MapFrame<f64>;
pub type MapFrame32 = map_model::MapFrame<f32>;
pub type PredictionSet64 = matching_loss::PredictionSet<f64>;
pub type PredictionSet32 = matching_loss::PredictionSet<f32>;
pub type LabelSet64 = matching_loss::LabelSet<f64>;
pub type LabelSet32 = matching_loss::LabelSet<f32>;
pub type LossWeights64 = matching_loss::LossWeights<f64>;
pub type LossWeights32 = matching_loss::LossWeights<f32>;
pub type MatchResult64 = matching_loss::MatchResult<f64>;
pub type MatchResult32 = matching_loss::MatchResult<f32>;
pub type MapVersion64 = change_diff::MapVersion<f64>;
pub type MapVersion32 = change_diff::MapVersion<f32>;
pub type ChangeReport64 = change_diff::ChangeReport<f64>;
pub type ChangeReport32 = change_diff::ChangeReport<f32>;
