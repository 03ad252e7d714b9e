//! Gradient (Perlin) noise, fBm octave sums, and the renormalized 2D warp
//! field built from two of them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::ControlPoint;
use crate::rng::NoiseStream;
use crate::scalar::Scalar;

/// Side length of the grid used to renormalize each field over the FOV.
pub const NORMALIZATION_GRID: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerlinParams {
    /// Meters per lattice cell at the base octave.
    pub grid_scale: f64,
    pub octaves: u32,
    pub persistence: f64,
    pub lacunarity: f64,
}

impl Default for PerlinParams {
    fn default() -> Self {
        Self {
            grid_scale: 15.0,
            octaves: 4,
            persistence: 0.5,
            lacunarity: 2.0,
        }
    }
}

impl PerlinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_scale.is_finite() && self.grid_scale > 0.0) {
            return Err(Error::InvalidParameter("perlin grid_scale must be positive".into()));
        }
        if self.octaves < 1 {
            return Err(Error::InvalidParameter("perlin octaves must be at least 1".into()));
        }
        if !(self.persistence.is_finite() && self.lacunarity.is_finite() && self.lacunarity > 0.0) {
            return Err(Error::InvalidParameter(
                "perlin persistence and lacunarity must be finite, lacunarity positive".into(),
            ));
        }
        Ok(())
    }
}

/// One octave of 2D gradient noise over a 256-periodic lattice.
#[derive(Clone, Debug)]
struct GradientNoise {
    perm: [u8; 512],
    gradients: [(f64, f64); 256],
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

impl GradientNoise {
    fn new(stream: &mut NoiseStream) -> Self {
        let mut table: [u8; 256] = std::array::from_fn(|i| i as u8);
        for i in (1..256).rev() {
            let j = stream.below(i + 1);
            table.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        let gradients = std::array::from_fn(|_| {
            let angle = stream.uniform() * std::f64::consts::TAU;
            (angle.cos(), angle.sin())
        });
        Self { perm, gradients }
    }

    fn hash(&self, ix: i64, iy: i64) -> usize {
        let x = (ix & 255) as usize;
        let y = (iy & 255) as usize;
        self.perm[self.perm[x] as usize + y] as usize
    }

    fn corner(&self, ix: i64, iy: i64, dx: f64, dy: f64) -> f64 {
        let (gx, gy) = self.gradients[self.hash(ix, iy)];
        gx * dx + gy * dy
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (ix, iy) = (x0 as i64, y0 as i64);
        let n00 = self.corner(ix, iy, fx, fy);
        let n10 = self.corner(ix + 1, iy, fx - 1.0, fy);
        let n01 = self.corner(ix, iy + 1, fx, fy - 1.0);
        let n11 = self.corner(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
        let (u, v) = (fade(fx), fade(fy));
        let a = n00 + u * (n10 - n00);
        let b = n01 + u * (n11 - n01);
        a + v * (b - a)
    }
}

/// Fractional Brownian motion: octave-summed gradient noise.
#[derive(Clone, Debug)]
pub struct FbmField {
    params: PerlinParams,
    octaves: Vec<(GradientNoise, (f64, f64))>,
}

impl FbmField {
    pub fn new(params: PerlinParams, stream: &mut NoiseStream) -> Self {
        let octaves = (0..params.octaves)
            .map(|_| {
                let noise = GradientNoise::new(stream);
                // Sub-cell offset keeps lattice zeros away from fixed world positions.
                let offset = (stream.uniform() * 256.0, stream.uniform() * 256.0);
                (noise, offset)
            })
            .collect();
        Self { params, octaves }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let mut freq = 1.0 / self.params.grid_scale;
        let mut amp = 1.0;
        let mut total = 0.0;
        for (noise, (ox, oy)) in &self.octaves {
            total += amp * noise.sample(x * freq + ox, y * freq + oy);
            freq *= self.params.lacunarity;
            amp *= self.params.persistence;
        }
        total
    }
}

/// A field normalized to zero mean and unit standard deviation over a
/// dense grid of the field of view.
#[derive(Clone, Debug)]
struct NormalizedField {
    fbm: FbmField,
    mean: f64,
    std: f64,
}

/// Cell-center coordinates of the normalization grid.
pub fn normalization_grid(fov_side: f64) -> impl Iterator<Item = (f64, f64)> + Clone {
    let cell = fov_side / NORMALIZATION_GRID as f64;
    let start = -fov_side / 2.0 + cell / 2.0;
    (0..NORMALIZATION_GRID).flat_map(move |i| {
        (0..NORMALIZATION_GRID).map(move |j| (start + i as f64 * cell, start + j as f64 * cell))
    })
}

impl NormalizedField {
    fn new(fbm: FbmField, fov_side: f64) -> Self {
        let samples: Vec<f64> = normalization_grid(fov_side).map(|(x, y)| fbm.sample(x, y)).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            fbm,
            mean,
            std: if std > 0.0 { std } else { 1.0 },
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        (self.fbm.sample(x, y) - self.mean) / self.std
    }
}

/// Continuous 2D → 2D displacement built from two independent fBm fields.
#[derive(Clone, Debug)]
pub struct WarpField {
    sigma: f64,
    fields: Option<(NormalizedField, NormalizedField)>,
}

impl WarpField {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Displacement in meters at `(x, y)`.
    pub fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        match &self.fields {
            None => (0.0, 0.0),
            Some((fx, fy)) => (self.sigma * fx.sample(x, y), self.sigma * fy.sample(x, y)),
        }
    }

    pub fn warp_point<T: Scalar>(&self, p: &ControlPoint<T>) -> ControlPoint<T> {
        let (dx, dy) = self.displacement(p.x.as_f64(), p.y.as_f64());
        p.translate(T::lit(dx), T::lit(dy))
    }
}

/// Builds the warp field for one frame. Each axis is an fBm field
/// renormalized over a dense FOV grid, then scaled by `sigma`.
pub fn fbm_warp_field(params: &PerlinParams, sigma: f64, seed: u64, fov_side: f64) -> Result<WarpField> {
    params.validate()?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter("warp sigma must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(WarpField { sigma, fields: None });
    }
    let mut stream = NoiseStream::from_seed(seed);
    let fx = FbmField::new(*params, &mut stream);
    let fy = FbmField::new(*params, &mut stream);
    Ok(WarpField {
        sigma,
        fields: Some((NormalizedField::new(fx, fov_side), NormalizedField::new(fy, fov_side))),
    })
}
