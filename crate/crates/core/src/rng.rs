//! Named, reproducible random sub-streams derived from one 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable counter-based generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// A seed that can be split into independent named children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    pub fn child(&self, name: &str) -> Self {
        Self(mix64(self.0 ^ fnv1a(name)))
    }

    pub fn index(&self, i: u64) -> Self {
        Self(mix64(self.0.wrapping_add(mix64(i))))
    }

    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }
}

/// Uniform sample in `[0, 1)` from a hashed counter.
pub fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample from two hashed counters (Box-Muller).
pub fn normal_from_hash(h1: u64, h2: u64) -> f64 {
    let u1 = unit_from_hash(h1).max(f64::MIN_POSITIVE);
    let u2 = unit_from_hash(h2);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
