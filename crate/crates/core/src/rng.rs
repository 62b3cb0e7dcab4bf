//! Seeded randomness and hashing helpers.
//!
//! Every random choice in the crate flows through a [`ChaCha8Rng`] seeded
//! either directly or via [`derive_seed`], so runs are reproducible from a
//! single master seed.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Build the crate-wide RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a master seed and a label.
///
/// Stages of a run (corpus generation, LM training, each soft-prompt
/// training, ...) get their own streams so that adding a stage never
/// perturbs the randomness of another.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = fnv1a64(label.as_bytes());
    h ^= master;
    // splitmix64 finalizer
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// FNV-1a 64-bit hash. Used for parameter fingerprints, config hashes, and
/// checkpoint tensor checksums.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over a stream of f64 values (their little-endian bit patterns).
pub struct Fingerprint {
    state: u64,
}

impl Fingerprint {
    pub fn new() -> Self {
        Self {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn update_f64(&mut self, values: &[f64]) {
        for v in values {
            for b in v.to_le_bytes() {
                self.state ^= u64::from(b);
                self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }

    pub fn update_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

impl Default for Fingerprint {
    fn default() -> Self {
        Self::new()
    }
}
