//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream derived
//! from the run seed and a fixed stream id, so results do not depend on
//! thread scheduling or on how many draws another consumer made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const FORWARD_STREAM: u64 = 1;
pub const BOUND_STREAM: u64 = 2;
pub const VALIDATION_STREAM: u64 = 3;
pub const GENERATOR_STREAM: u64 = 4;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Sub-stream of `id` for iteration `k`; keeps per-iteration draws
/// independent of how many earlier iterations ran.
pub fn iteration_stream(seed: u64, id: u64, k: u64) -> StreamRng {
    let mut r = stream(seed, id);
    r.set_word_pos(u128::from(k) << 40);
    r
}
