//! Seeded random draws for the loss channel and the synthetic corpora.
//!
//! The generator is SplitMix64 (Steele & Lea's 64-bit mix function, the same
//! stream used to seed the xoshiro family). It is ten lines of integer
//! arithmetic with no platform dependence: a given seed produces the same
//! draws on every machine, so a loss pattern or a generated corpus can be
//! reproduced from nothing but the seed recorded in a CSV row.

/// SplitMix64 stream: one `u64` of state advanced by the golden-ratio gamma,
/// with two xor-multiply rounds on the way out.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1). Uses the top 53 bits, so every result is an exact
    /// multiple of 2^-53 and the comparison `draw < p` is reproducible across
    /// compilers and platforms.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Independent child stream seeded from this one. Lets one master seed
    /// drive per-tensor or per-run streams without draw-count coupling.
    pub fn fork(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference outputs computed with an independent implementation of the
    // published algorithm. Seed 0 starting with 0xe220a8397b1dcdaf is the
    // widely circulated test vector.
    #[test]
    fn known_answer_streams() {
        let cases: [(u64, [u64; 4]); 3] = [
            (
                0,
                [
                    0xe220a8397b1dcdaf,
                    0x6e789e6aa1b965f4,
                    0x06c45d188009454f,
                    0xf88bb8a8724c81ec,
                ],
            ),
            (
                1,
                [
                    0x910a2dec89025cc1,
                    0xbeeb8da1658eec67,
                    0xf893a2eefb32555e,
                    0x71c18690ee42c90b,
                ],
            ),
            (
                0xdeadbeef,
                [
                    0x4adfb90f68c9eb9b,
                    0xde586a3141a10922,
                    0x021fbc2f8e1cfc1d,
                    0x7466ce737be16790,
                ],
            ),
        ];
        for (seed, expected) in cases {
            let mut rng = SplitMix64::new(seed);
            for (i, want) in expected.into_iter().enumerate() {
                let got = rng.next_u64();
                assert_eq!(got, want, "seed {seed:#x} draw {i}: {got:#x} != {want:#x}");
            }
        }
    }

    #[test]
    fn f64_draws_are_exact_dyadics_in_unit_interval() {
        let mut rng = SplitMix64::new(42);
        let first = rng.next_f64();
        assert_eq!(first, 0.74156487877182331, "seed 42 first draw");
        let mut rng = SplitMix64::new(42);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x), "draw {x} outside [0,1)");
            assert_eq!(x, (x * 9007199254740992.0).round() / 9007199254740992.0);
        }
    }

    #[test]
    fn fork_decouples_streams() {
        let mut a = SplitMix64::new(5);
        let mut child = a.fork();
        let c0 = child.next_u64();
        // Draining more of the parent never changes what the child produced.
        let mut b = SplitMix64::new(5);
        let mut child_b = b.fork();
        b.next_u64();
        b.next_u64();
        assert_eq!(child_b.next_u64(), c0);
    }
}
