//! Deterministic random streams.
//!
//! Every stochastic draw in the simulator comes from a [`NoiseStream`] that is
//! derived from a global seed plus a path of task indices (input index, trial
//! index, ...). Two tasks with different paths get statistically independent
//! streams, and a given path always yields the same stream no matter which
//! worker thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type NoiseStream = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for the root of a seed tree.
pub fn stream(seed: u64) -> NoiseStream {
    derive_stream(seed, &[])
}

/// Seed of the subtree at `path`; `derive_stream(derive_seed(s, a), b)`
/// differs from `derive_stream(s, a ++ b)` but is just as independent.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut key = splitmix64(seed);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p.wrapping_add(GOLDEN)));
    }
    key
}

/// Stream identified by `(seed, path)`.
pub fn derive_stream(seed: u64, path: &[u64]) -> NoiseStream {
    let key = derive_seed(seed, path);
    let mut bytes = [0u8; 32];
    let mut k = key;
    for chunk in bytes.chunks_exact_mut(8) {
        k = splitmix64(k);
        chunk.copy_from_slice(&k.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
