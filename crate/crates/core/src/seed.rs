//! Derivation of independent random streams from one top-level seed.
//!
//! Every consumer of randomness names its stream (`"corpus"`, `"lda-10"`,
//! `"de/round-3"`, ...). The stream seed is `splitmix64(seed ^ fnv1a(name))`,
//! so a single seed reproduces an entire run and adding a stream never shifts
//! the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_CORPUS: &str = "corpus";
pub const STREAM_DE: &str = "de";

pub fn lda_stream(topics: usize) -> String {
    format!("lda-{topics}")
}

pub fn round_stream(round: usize) -> String {
    format!("de/round-{round}")
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    splitmix64(seed ^ fnv1a(stream.as_bytes()))
}

pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
