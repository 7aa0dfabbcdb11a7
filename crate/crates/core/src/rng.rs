//! Seed derivation.
//!
//! Every random stream in the engine is a ChaCha8 generator whose seed is
//! derived from the master seed and a path of integer tags (scene index,
//! particle index, stage, ...). Tags are folded in order with SplitMix64:
//!
//! ```text
//! h = splitmix(master)
//! for tag in tags: h = splitmix(h ^ splitmix(tag + 0x9E3779B97F4A7C15))
//! ```
//!
//! Because each stream depends only on its tag path, results do not depend
//! on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EngineRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a master seed and a tag path.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(master), |h, &t| {
        splitmix(h ^ splitmix(t.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    })
}

/// A generator for the stream identified by `tags` under `master`.
pub fn stream(master: u64, tags: &[u64]) -> EngineRng {
    EngineRng::seed_from_u64(derive_seed(master, tags))
}

/// Stage tags used when deriving streams.
pub mod stage {
    pub const PROPAGATE: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const REJUVENATE: u64 = 3;
    pub const DETECTOR: u64 = 10;
    pub const SCENE: u64 = 11;
    pub const DETECTIONS: u64 = 12;
    pub const TRAJECTORY: u64 = 13;
    pub const REINFER: u64 = 14;
    pub const BOOTSTRAP: u64 = 15;
    pub const ORDER: u64 = 16;
}
