//! Small counter-based hash stream used for mesh jitter and seeded noise.

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic value in [-1, 1] keyed by `(seed, index, lane)`.
pub fn signed_unit(seed: u64, index: u64, lane: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(index ^ splitmix64(lane)));
    // 53 high bits -> [0, 1)
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}
