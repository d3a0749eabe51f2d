//! Counter-based random number streams.
//!
//! Every deviate is a pure function of (seed, stream, counter), so parallel
//! consumers can be keyed by sample index and produce bit-identical output
//! for any worker count. No state is shared; a [`Stream`] is just a cursor.

/// SplitMix64 finalizer: add the golden-ratio increment, then two
/// xor-multiply rounds.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The raw 64-bit word at a given (seed, stream, counter) coordinate.
#[inline]
pub fn word(seed: u64, stream: u64, counter: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ stream) ^ counter)
}

/// Uniform deviate in [0,1) with 53 random bits.
#[inline]
pub fn unit_f64(seed: u64, stream: u64, counter: u64) -> f64 {
    (word(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A positioned cursor into one stream.
#[derive(Debug, Clone)]
pub struct Stream {
    pub seed: u64,
    pub stream: u64,
    pub counter: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream { seed, stream, counter: 0 }
    }

    pub fn next_word(&mut self) -> u64 {
        let w = word(self.seed, self.stream, self.counter);
        self.counter += 1;
        w
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
