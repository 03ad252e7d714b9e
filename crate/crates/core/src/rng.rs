//! Counter-keyed random streams.
//!
//! Every draw in the perturbation pipeline comes from a ChaCha stream whose
//! 256-bit seed is the tuple `(master_seed, frame hash, mutation index,
//! feature index)`. Streams for different keys are independent, so results
//! do not depend on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Feature slot used for draws that apply to a whole frame.
pub const FRAME_SLOT: u64 = u64::MAX;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub frame_hash: u64,
    pub mutation: u64,
    pub feature: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, frame_id: &str, mutation: usize) -> Self {
        Self {
            master_seed,
            frame_hash: stable_hash(frame_id.as_bytes()),
            mutation: mutation as u64,
            feature: FRAME_SLOT,
        }
    }

    pub fn feature(self, index: usize) -> Self {
        Self {
            feature: index as u64,
            ..self
        }
    }

    pub fn frame(self) -> Self {
        Self {
            feature: FRAME_SLOT,
            ..self
        }
    }

    pub fn stream(self) -> NoiseStream {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.frame_hash.to_le_bytes());
        seed[16..24].copy_from_slice(&self.mutation.to_le_bytes());
        seed[24..32].copy_from_slice(&self.feature.to_le_bytes());
        NoiseStream {
            rng: ChaCha8Rng::from_seed(seed),
        }
    }
}

/// A single deterministic stream of uniform and Gaussian draws.
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        // p = 1 must always fire and p = 0 never; uniform() < 1 always holds.
        self.uniform() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal(&mut self, sigma: f64) -> f64 {
        sigma * self.standard_normal()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}
