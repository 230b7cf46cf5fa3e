//! Deterministic RNG derivation.
//!
//! All randomness in the crate flows from a single `u64` seed through the
//! helpers here, so that any run is reproducible bit-for-bit from its seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream offsets, so unrelated consumers of one seed never collide.
pub mod streams {
    /// Per-sweep shuffle streams: `SWEEP_BASE + sweep`.
    pub const SWEEP_BASE: u64 = 1 << 32;
    /// Per-module warm-up split streams: `WARMUP_BASE + module_id`.
    pub const WARMUP_BASE: u64 = 2 << 32;
    /// Start-cell draws during policy evaluation.
    pub const EVAL_STARTS: u64 = 3 << 32;
}

/// A generator for (`seed`, `stream`). Distinct streams of the same seed are
/// independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed with a tag into a fresh seed (splitmix64 finalizer).
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Mixes a seed with two tags, e.g. (sweep, task).
pub fn mix2(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(seed, a), b)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
