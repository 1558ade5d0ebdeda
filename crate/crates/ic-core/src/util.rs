//! Deterministic hashing helpers.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
pub fn hash_words<I: IntoIterator<Item = u64>>(seed: u64, words: I) -> u64 {
    let mut h = mix64(seed);
    for w in words {
        h = mix64(h ^ w);
    }
    h
}

/// Seed of trial `idx` under `master`.
pub fn trial_seed(master: u64, idx: u64) -> u64 {
    hash_words(master, [idx, 0x7472_6961_6c00_0000])
}
