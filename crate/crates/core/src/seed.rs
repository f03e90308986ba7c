/// Combines a base seed with a key into a well-spread 64-bit seed (splitmix64 finalizer).
pub fn mix_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th item of a stream, independent of evaluation order.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix_seed(mix_seed(seed, stream), index)
}
