//! Counter-based pseudo-random numbers.
//!
//! Value `k` of the stream keyed by `key` is `mix64(key + G (k + 1))`, where
//! `mix64` is the SplitMix64 finaliser and `G = 0x9E3779B97F4A7C15`. Streams
//! are therefore random-access and trivially reproducible in any language
//! with wrapping 64-bit arithmetic. Uniforms take the top 53 bits and are
//! centred in their bucket so they never equal 0 or 1; normals are
//! `Φ⁻¹(u)` computed with [`crate::normal::quantile`].

use crate::normal;

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master_seed`.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Number of values drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = derive_seed(self.key, self.counter);
        self.counter += 1;
        out
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion.
    pub fn next_normal(&mut self) -> f64 {
        normal::quantile(self.next_uniform())
    }
}
