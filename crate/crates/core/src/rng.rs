//! Seed derivation and random streams.
//!
//! Every random quantity is a pure function of a 64-bit seed:
//!
//! * environment sites come from a counter-based ChaCha stream, so the value
//!   at site `x` depends only on `(seed, x)` and windows can grow without
//!   reshuffling what was already drawn;
//! * replicate seeds are derived from `(master, replicate, tag)` by a
//!   SplitMix64-style mixer, so results do not depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purpose of a derived stream. Distinct tags give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Environment,
    Walk,
    Valley,
    Mixture,
    Excursion,
}

impl StreamTag {
    fn salt(self) -> u64 {
        match self {
            StreamTag::Environment => 0x656e_7669_726f_6e6d,
            StreamTag::Walk => 0x7761_6c6b_7761_6c6b,
            StreamTag::Valley => 0x7661_6c6c_6579_7676,
            StreamTag::Mixture => 0x6d69_7874_7572_6565,
            StreamTag::Excursion => 0x6578_6375_7273_696f,
        }
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` for the stream `tag`.
pub fn derive_seed(master: u64, index: u64, tag: StreamTag) -> u64 {
    mix64(mix64(master ^ tag.salt()).wrapping_add(mix64(index.wrapping_add(0x1234_5678))))
}

/// A sequential stream seeded from a derived seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Converts a raw word to a uniform variate in `[0, 1)` with 53 bits.
#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based uniforms indexed by site.
///
/// Site `x >= 0` reads word pair `x` of stream 0, site `x < 0` reads word
/// pair `-x - 1` of stream 1.
#[derive(Debug, Clone)]
pub struct SiteUniforms {
    seed: u64,
}

impl SiteUniforms {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Uniform variate attached to a single site.
    pub fn at(&self, x: i64) -> f64 {
        let mut out = [0.0];
        self.fill(x, &mut out);
        out[0]
    }

    /// Fills `out[i]` with the uniform of site `start + i`.
    pub fn fill(&self, start: i64, out: &mut [f64]) {
        let end = start + out.len() as i64; // exclusive
        // non-negative part
        let lo = start.max(0);
        if lo < end {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(0);
            rng.set_word_pos(2 * lo as u128);
            for x in lo..end {
                out[(x - start) as usize] = unit_f64(rng.next_u64());
            }
        }
        // negative part, read in order of decreasing x
        let hi = end.min(0);
        if start < hi {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(1);
            rng.set_word_pos(2 * (-hi) as u128);
            for x in (start..hi).rev() {
                out[(x - start) as usize] = unit_f64(rng.next_u64());
            }
        }
    }
}
