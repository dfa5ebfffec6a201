//! Seeded, splittable random streams.
//!
//! Every consumer derives its own ChaCha stream from `(seed, stream id)`, so
//! results never depend on the order in which streams are drawn from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream namespaces. Values are part of the reproducibility contract.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const WORDS: u64 = 2;
    pub const TRAIN_EPISODES: u64 = 3;
    pub const EVAL_EPISODES: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const ANALYSIS: u64 = 6;
    pub const FOREST: u64 = 7;
    pub const PROBE: u64 = 8;
}

/// Independent stream `(namespace, index)` under `seed`.
pub fn stream(seed: u64, namespace: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(namespace.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    rng
}
