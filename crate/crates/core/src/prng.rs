//! Deterministic, stream-splittable PRNG.
//!
//! Everything stochastic in the pipeline draws from [`Pcg32`], a
//! self-contained implementation of the PCG-XSH-RR 64/32 generator
//! (O'Neill's `pcg32`): 64-bit LCG state advanced by
//! `state * 6364136223846793005 + inc`, output by xorshift-high then
//! random rotate. The generator is hand-rolled rather than pulled from
//! a crate because dataset and model files carry byte-for-byte golden
//! guarantees; the algorithm must stay frozen independent of external
//! version bumps.
//!
//! # Streams
//!
//! `inc` is derived from a caller-chosen stream id, so one seed fans
//! out into independent sequences: `Pcg32::new(seed, stream)`. Dataset
//! generation uses the sample index as the stream id, which makes each
//! sample's draws independent of how many samples precede it.
//!
//! # Float conversion
//!
//! `next_f64` builds a uniform double in `[0, 1)` as
//! `(next_u64() >> 11) as f64 * 2^-53` — the top 53 bits of a 64-bit
//! draw scaled by the double-precision ulp. `next_u64` concatenates two
//! 32-bit outputs, first draw high: `(hi << 32) | lo`.

const MULT: u64 = 6364136223846793005;

/// PCG-XSH-RR 64/32 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

impl Pcg32 {
    /// Creates a generator from a seed and a stream id.
    ///
    /// Matches the reference `pcg32_srandom_r`: the stream id selects
    /// the (odd) LCG increment, then the seed is mixed into the state.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut g = Pcg32 {
            state: 0,
            inc: (stream << 1) | 1,
        };
        g.next_u32();
        g.state = g.state.wrapping_add(seed);
        g.next_u32();
        g
    }

    /// Next 32 uniform bits.
    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(MULT).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Next 64 uniform bits: two 32-bit draws, first draw high.
    pub fn next_u64(&mut self) -> u64 {
        let hi = self.next_u32() as u64;
        let lo = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform double in `[0, 1)` from the top 53 bits of a 64-bit draw.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`, unbiased via rejection sampling.
    ///
    /// Panics if `n == 0`.
    pub fn next_below(&mut self, n: u32) -> u32 {
        assert!(n > 0, "next_below requires n > 0");
        // Reject draws below 2^32 mod n so the remainder is uniform.
        let threshold = n.wrapping_neg() % n;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % n;
            }
        }
    }

    /// In-place Fisher–Yates shuffle (descending index order).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u32 + 1) as usize;
            items.swap(i, j);
        }
    }
}
