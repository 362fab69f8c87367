//! Seedable FNV-1a hashing.
//!
//! One stable 64-bit hash serves content digests, feature hashing, cache
//! keys, and seed derivation. FNV-1a is platform-independent, which the
//! reproducibility guarantees elsewhere in the crate rely on; `std`'s
//! `DefaultHasher` is explicitly unstable across releases.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_seeded(bytes, 0)
}

/// FNV-1a with the state pre-mixed by `seed`, for keyed hashing.
/// Seed 0 is the plain unkeyed hash.
pub fn fnv1a_seeded(bytes: &[u8], seed: u64) -> u64 {
    let mut h = if seed == 0 { FNV_OFFSET } else { FNV_OFFSET ^ mix64(seed) };
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; used to derive well-separated seeds from
/// (seed, index) pairs.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a base seed with a label (e.g. an email digest or stream index).
pub fn derive_seed(base: u64, label: u64) -> u64 {
    mix64(base ^ mix64(label))
}
