//! Portable deterministic random number generation.
//!
//! Everything that draws randomness in this crate goes through [`SplitRng`],
//! a xoshiro256++ generator seeded through SplitMix64. The state transition
//! is fixed by this module, so identical (seed, stream) pairs reproduce the
//! same draws on every platform and in every build. Streams partition the
//! sequence for independent trials: trial `k` uses `SplitRng::with_stream(seed, k)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 step, used only for state expansion.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256++ generator with SplitMix64 seeding and stream splitting.
#[derive(Debug, Clone)]
pub struct SplitRng {
    s: [u64; 4],
    /// Cached second deviate of the Marsaglia polar transform.
    spare_normal: Option<f64>,
}

impl SplitRng {
    /// Generator for stream 0 of `seed`.
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent generator for (`seed`, `stream`). The state is the first
    /// four SplitMix64 outputs of `seed ^ (stream * 0xA3EC647659359ACD)`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut sm = seed ^ stream.wrapping_mul(0xA3EC_6476_5935_9ACD);
        let mut s = [0u64; 4];
        for slot in &mut s {
            *slot = splitmix64(&mut sm);
        }
        if s == [0, 0, 0, 0] {
            s[0] = GOLDEN; // all-zero state is invalid for xoshiro
        }
        SplitRng {
            s,
            spare_normal: None,
        }
    }

    /// Next raw 64-bit output (xoshiro256++ scrambler).
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits: (x >> 11) * 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform strictly inside (0, 1): ((x >> 11) + 0.5) * 2^-53.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn next_index(&mut self, n: usize) -> usize {
        // Multiply-shift bounded draw; bias is < n / 2^64, negligible here.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via the Marsaglia polar method (rejection + sqrt/ln only).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * m);
                return u * m;
            }
        }
    }
}
