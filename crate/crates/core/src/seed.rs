//! Named random streams derived from a single run seed.
//!
//! Every stochastic step (splitting, tree bagging, randomized baselines) draws
//! from its own stream so that one top-level seed reproduces a whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream name for the train/test split.
pub const SPLIT: &str = "split";
/// Stream name for the validation carve-out of the training split.
pub const VALIDATION: &str = "validation";
/// Stream name for forest training.
pub const TRAIN: &str = "train";
/// Stream name for sampled randomized baselines.
pub const RANDOMIZE: &str = "randomize";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a named stream. Stable across platforms and releases.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    // FNV-1a over the stream name, then mixed with the run seed.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in stream.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// ChaCha generator for a named stream of `seed`.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
