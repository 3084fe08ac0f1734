//! Deterministic random streams.
//!
//! [`RngStream`] is a xoroshiro128++ generator whose 128-bit state is seeded
//! from `(seed, stream_id)` through SplitMix64. The output sequence depends on
//! nothing but those two integers, so runs replay bit-exactly on any platform.
//! Parallel work gets one substream per task via [`RngStream::derive_substream`].

/// Golden-ratio increment used by SplitMix64.
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain separator for stream ids.
const SUBSTREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    s0: u64,
    s1: u64,
}

impl RngStream {
    /// Root stream for `seed` (stream id 0).
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// The stream identified by `(seed, stream_id)`. Every stream, root or
    /// derived, is fully determined by this pair.
    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut key = stream_id ^ SUBSTREAM_SALT;
        // Hash the id before it touches the seed so that neighbouring ids
        // land on unrelated states.
        let mut sm = seed.wrapping_add(splitmix64(&mut key).rotate_left(17));
        let mut s0 = splitmix64(&mut sm);
        let mut s1 = splitmix64(&mut sm);
        if s0 == 0 && s1 == 0 {
            // xoroshiro must never sit at the all-zero state.
            s0 = GOLDEN_GAMMA;
            s1 = SUBSTREAM_SALT;
        }
        Self { seed, stream_id, s0, s1 }
    }

    /// Substream `k` of this stream's seed. The result depends only on
    /// `(self.seed(), k)`; draws already taken from `self` do not matter.
    /// Substream 0 is the root stream itself.
    pub fn derive_substream(&self, k: u64) -> Self {
        Self::with_stream(self.seed, k)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s0 = self.s0;
        let mut s1 = self.s1;
        let result = s0.wrapping_add(s1).rotate_left(17).wrapping_add(s0);
        s1 ^= s0;
        self.s0 = s0.rotate_left(49) ^ s1 ^ (s1 << 21);
        self.s1 = s1.rotate_left(28);
        result
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`; never returns 0 or 1.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (Lemire's multiply-shift, with rejection).
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index on empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Generator state as 16 little-endian bytes (`s0` then `s1`).
    pub fn state_bytes(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.s0.to_le_bytes());
        out[8..].copy_from_slice(&self.s1.to_le_bytes());
        out
    }

    /// Restores a checkpoint taken with [`state_bytes`](Self::state_bytes).
    pub fn restore(seed: u64, stream_id: u64, state: [u8; 16]) -> crate::Result<Self> {
        let s0 = u64::from_le_bytes(state[..8].try_into().unwrap());
        let s1 = u64::from_le_bytes(state[8..].try_into().unwrap());
        if s0 == 0 && s1 == 0 {
            return Err(crate::Error::invalid("all-zero generator state"));
        }
        Ok(Self { seed, stream_id, s0, s1 })
    }
}
