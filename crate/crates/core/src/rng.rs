//! Seeded random streams.
//!
//! Everything random in the toolkit (weight init, latent input, masks, noise)
//! draws from a xoshiro256** generator seeded through SplitMix64, with normal
//! variates from the Box-Muller transform. Both are fully specified algorithms,
//! so fixtures are bit-exact across platforms.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// A deterministic stream of uniform and standard-normal variates.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: Xoshiro256StarStar,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        // `seed_from_u64` expands the seed with SplitMix64.
        Self {
            rng: Xoshiro256StarStar::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-a, a)`.
    pub fn symmetric(&mut self, a: f64) -> f64 {
        a * (2.0 * self.uniform() - 1.0)
    }

    /// Uniform integer in `0..bound` by widening multiply.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.rng.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Standard normal variate (Box-Muller, both outputs used).
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = std::f64::consts::TAU * u2;
        self.spare = Some(r * phi.sin());
        r * phi.cos()
    }

    pub fn gaussian_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.gaussian()).collect()
    }
}
