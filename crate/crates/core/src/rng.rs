//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random stream is keyed by `(master seed, purpose tag, indices)` and
//! backed by ChaCha8, so workers can materialize any cell's stream without
//! sharing generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for the stream `(master, tag, indices)`.
///
/// The mapping is fixed across platforms and releases; changing it would
/// change every stored experiment.
pub fn derive_seed(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    // FNV-1a over the tag bytes, folded through the mixer
    let mut fnv: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        fnv ^= u64::from(b);
        fnv = fnv.wrapping_mul(0x0100_0000_01b3);
    }
    h = splitmix64(h ^ fnv);
    h = splitmix64(h ^ indices.len() as u64);
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, tag: &str, indices: &[u64]) -> StreamRng {
    rng_from_seed(derive_seed(master, tag, indices))
}
