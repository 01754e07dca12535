//! Per-replica random streams.
//!
//! Replica `r` of an experiment with base seed `s` draws from
//! `Xoshiro256PlusPlus::seed_from_u64(stream_key(s, r))`, where
//!
//! ```text
//! stream_key(s, r) = splitmix64(s ^ splitmix64(r))
//! ```
//!
//! `splitmix64` is the SplitMix64 output function (a bijection of `u64`), so for
//! a fixed seed distinct replica indices always map to distinct keys.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// SplitMix64 finalizer applied to `x + golden gamma`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit key of the stream used by replica `replica` under base seed `seed`.
#[inline]
pub fn stream_key(seed: u64, replica: u64) -> u64 {
    splitmix64(seed ^ splitmix64(replica))
}

/// The random source owned by one replica.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: Xoshiro256PlusPlus,
}

impl StreamRng {
    pub fn from_key(key: u64) -> Self {
        StreamRng {
            inner: Xoshiro256PlusPlus::seed_from_u64(key),
        }
    }

    pub fn for_replica(seed: u64, replica: u64) -> Self {
        Self::from_key(stream_key(seed, replica))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
