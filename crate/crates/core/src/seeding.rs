//! Deterministic seed derivation.
//!
//! Every run, graph, and bootstrap substream gets its seed from a stable hash
//! of the master seed plus a purpose tag, so streams are uncorrelated across
//! scales and reproducible across hosts (never `std::hash`, which is
//! randomized per process).

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mix a master seed with a purpose tag and integer parts into a new seed.
pub fn derive_seed(master: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ fnv1a(tag.as_bytes()));
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}
