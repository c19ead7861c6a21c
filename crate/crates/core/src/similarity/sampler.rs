//! Stateless counter-based pair sampler.
//!
//! Draw `k` of a stream is a pure function of `(seed, group_code, k)`, so
//! any partition of the ordinals across threads yields the same draws.

/// FNV-1a, used only to fold the group code into the stream key.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: &str) -> Self {
        CounterRng { key: mix64(seed ^ mix64(fnv1a(stream.as_bytes()))) }
    }

    pub fn at(&self, ordinal: u64) -> u64 {
        mix64(self.key.wrapping_add(ordinal.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `0..bound` by the multiply-high reduction.
    pub fn below(&self, ordinal: u64, bound: u64) -> u64 {
        ((self.at(ordinal) as u128 * bound as u128) >> 64) as u64
    }
}

/// Row-major offset of row `i` in the strict upper triangle of an `n x n` matrix.
fn row_offset(n: u64, i: u64) -> u64 {
    i * (2 * n - i - 1) / 2
}

/// Maps a linear pair rank in `0..n(n-1)/2` to `(i, j)` with `i < j`.
pub fn unrank_pair(n: u64, k: u64) -> (usize, usize) {
    debug_assert!(k < n * (n - 1) / 2);
    let b = (2 * n - 1) as f64;
    let guess = ((b - (b * b - 8.0 * k as f64).max(0.0).sqrt()) / 2.0).floor() as u64;
    let mut i = guess.min(n - 2);
    while i > 0 && row_offset(n, i) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && row_offset(n, i + 1) <= k {
        i += 1;
    }
    let j = i + 1 + (k - row_offset(n, i));
    (i as usize, j as usize)
}
