use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::{clip_to_fov, ClassTable, MapFrame, ModelDims};
use crate::rng::StreamKey;
use crate::scalar::Scalar;

use super::mutations::*;
use super::perlin::PerlinParams;

/// One mutation and exactly the parameters its kind uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MutationSpec {
    DropFeatures { p: f64 },
    DuplicateFeatures { p: f64 },
    WrongClass { p: f64 },
    JitterControlPoints { sigma: f64 },
    ShiftFeatures { sigma: f64 },
    LocalizationNoise { sigma: f64, sigma_yaw_deg: f64 },
    PerlinWarp {
        sigma: f64,
        #[serde(default)]
        perlin: PerlinParams,
    },
}

impl MutationSpec {
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            MutationSpec::DropFeatures { .. }
                | MutationSpec::DuplicateFeatures { .. }
                | MutationSpec::WrongClass { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("p = {p} outside [0, 1]")))
            }
        };
        let sig = |s: f64| {
            if s.is_finite() && s >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("sigma = {s} must be >= 0")))
            }
        };
        match *self {
            MutationSpec::DropFeatures { p }
            | MutationSpec::DuplicateFeatures { p }
            | MutationSpec::WrongClass { p } => prob(p),
            MutationSpec::JitterControlPoints { sigma } | MutationSpec::ShiftFeatures { sigma } => sig(sigma),
            MutationSpec::LocalizationNoise { sigma, sigma_yaw_deg } => {
                sig(sigma)?;
                sig(sigma_yaw_deg)
            }
            MutationSpec::PerlinWarp { sigma, perlin } => {
                sig(sigma)?;
                perlin.validate()
            }
        }
    }
}

/// Ordered mutations plus the master seed that keys every draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRecipe {
    pub master_seed: u64,
    pub mutations: Vec<MutationSpec>,
}

impl PerturbRecipe {
    /// Every mutation except the Perlin warp at the low noise level:
    /// probability 0.1 for discrete kinds, 0.1 m (and 0.1°) for continuous ones.
    pub fn low_all_noise(master_seed: u64) -> Self {
        Self {
            master_seed,
            mutations: vec![
                MutationSpec::DropFeatures { p: 0.1 },
                MutationSpec::DuplicateFeatures { p: 0.1 },
                MutationSpec::WrongClass { p: 0.1 },
                MutationSpec::JitterControlPoints { sigma: 0.1 },
                MutationSpec::ShiftFeatures { sigma: 0.1 },
                MutationSpec::LocalizationNoise { sigma: 0.1, sigma_yaw_deg: 0.1 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mutations.iter().try_for_each(MutationSpec::validate)
    }
}

/// Shape and class configuration a recipe runs under.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerturbContext {
    pub dims: ModelDims,
    pub class_table: ClassTable,
}

/// Applies one mutation with its own stream key.
pub fn apply_mutation<T: Scalar>(
    frame: &MapFrame<T>,
    spec: &MutationSpec,
    ctx: &PerturbContext,
    key: StreamKey,
) -> Result<MapFrame<T>> {
    match *spec {
        MutationSpec::DropFeatures { p } => drop_features(frame, p, key),
        MutationSpec::DuplicateFeatures { p } => duplicate_features(frame, p, ctx.dims.m_pred, key),
        MutationSpec::WrongClass { p } => corrupt_class(frame, p, &ctx.class_table, key),
        MutationSpec::JitterControlPoints { sigma } => jitter_control_points(frame, sigma, key),
        MutationSpec::ShiftFeatures { sigma } => shift_features(frame, sigma, key),
        MutationSpec::LocalizationNoise { sigma, sigma_yaw_deg } => {
            localization_noise(frame, sigma, sigma_yaw_deg, key)
        }
        MutationSpec::PerlinWarp { sigma, ref perlin } => perlin_warp(frame, sigma, perlin, key),
    }
}

/// Runs the recipe in order, then clips the result back to the field of
/// view (clipped pieces are resampled to `n_points`).
pub fn apply_recipe<T: Scalar>(
    frame: &MapFrame<T>,
    recipe: &PerturbRecipe,
    ctx: &PerturbContext,
) -> Result<MapFrame<T>> {
    recipe.validate()?;
    let mut current = frame.clone();
    for (index, spec) in recipe.mutations.iter().enumerate() {
        let key = StreamKey::new(recipe.master_seed, &frame.frame_id, index);
        current = apply_mutation(&current, spec, ctx, key)?;
    }
    clip_to_fov(&current, ctx.dims.n_points)
}
