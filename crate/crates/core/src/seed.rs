//! Deterministic random-stream derivation.
//!
//! A master seed expands into independent sub-streams keyed by integer tags
//! (replication, slot, stage, ...). Parallel and serial execution see the
//! same streams because every stream is a pure function of its tags.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a master seed and a tag path into one sub-seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = mix(master);
    for &t in tags {
        s = mix(s ^ t.wrapping_mul(0xD134_2543_DE82_EF95));
    }
    s
}

/// Stream for a given tag path under a master seed.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
