//! Deterministic RNG stream derivation.
//!
//! Every randomized operation derives an independent ChaCha stream from a
//! master seed plus context indices, so results are identical regardless
//! of evaluation order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for seed mixing.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a stream from (master_seed, a, b). Distinct (a, b) pairs yield
/// statistically independent streams.
pub fn stream(master_seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    let s = mix(master_seed ^ mix(a ^ mix(b)));
    ChaCha8Rng::seed_from_u64(s)
}

/// Single-context stream.
pub fn root(master_seed: u64, context: u64) -> ChaCha8Rng {
    stream(master_seed, context, 0)
}
