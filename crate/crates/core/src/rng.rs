//! Seedable randomness with cross-platform reproducible streams.
//!
//! Every stochastic component of the crate draws from [`RandomnessSource`],
//! a ChaCha8 generator: the ChaCha stream cipher has published reference
//! outputs and produces identical bytes on every platform for a given seed.
//! Child seeds (per epoch, per worker, per sweep cell) are derived with the
//! SplitMix64 finalizer so that streams are replayable without being stored.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic pseudo-random source. Identical seeds yield identical
/// output streams across platforms and releases of this crate.
#[derive(Debug, Clone)]
pub struct RandomnessSource {
    rng: ChaCha8Rng,
    seed: u64,
}

impl RandomnessSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    /// The seed this source was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh source whose seed is a pure function of this source's seed
    /// and the two labels. Drawing from `self` does not affect the result.
    pub fn derived(&self, stream: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(self.seed, stream, index))
    }
}

impl RngCore for RandomnessSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on u64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed as a pure function of `(master, stream, index)`.
///
/// `stream` distinguishes purposes (epoch counter, sweep cell, ...) and
/// `index` distinguishes instances within a purpose (worker id, ...).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream) ^ splitmix64(index ^ 0x517c_c1b7_2722_0a95))
}

/// FNV-1a over bytes; used to fold structured labels into seed material in a
/// way that is stable across platforms and compiler versions.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_seeds_identical_streams() {
        let mut a = RandomnessSource::from_seed(7);
        let mut b = RandomnessSource::from_seed(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    // Golden values freeze the generator choice: if the backing algorithm
    // ever changes, these fail and every recorded experiment is invalidated.
    #[test]
    fn golden_stream_seed_42() {
        let mut rng = RandomnessSource::from_seed(42);
        let first: Vec<u64> = (0..4).map(|_| rng.next_u64()).collect();
        assert_eq!(
            first,
            vec![
                12578764544318200737,
                17529487244874322312,
                7886285670807131020,
                11572758976476374866,
            ]
        );
    }

    #[test]
    fn derive_seed_is_pure_and_spread() {
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
        assert_ne!(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
    }

    #[test]
    fn derived_source_independent_of_draws() {
        let a = RandomnessSource::from_seed(9);
        let mut b = RandomnessSource::from_seed(9);
        let _ = b.random_range(0..1000);
        assert_eq!(a.derived(1, 2).seed(), b.derived(1, 2).seed());
    }
}
