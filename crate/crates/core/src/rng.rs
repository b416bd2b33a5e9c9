//! Counter-based random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream, addressed by a
//! `(key, stream)` pair. Keys are derived hierarchically from a master seed
//! with a SplitMix64 mix, so a mesh node, a time index and a path index each
//! select a reproducible, non-overlapping stream regardless of how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedKey(pub u64);

impl SeedKey {
    pub fn new(seed: u64) -> Self {
        SeedKey(seed)
    }

    /// Derives an independent child key, e.g. for a mesh node or a time index.
    pub fn child(self, index: u64) -> SeedKey {
        SeedKey(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03))))
    }

    /// Derives a labelled child key so different experiments sharing a seed
    /// do not reuse streams.
    pub fn domain(self, label: &str) -> SeedKey {
        let h = label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
        SeedKey(splitmix64(self.0 ^ h))
    }

    /// The random stream of path `stream` under this key.
    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}
