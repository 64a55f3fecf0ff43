use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream used for per-frame augmentation draws: frame index with the top bit set.
pub const AUGMENT_STREAM_BIT: u64 = 1 << 63;
/// Stream for the final-cap shuffle during curation.
pub const CURATION_CAP_STREAM: u64 = 1 << 62;
/// Stream for the train/test shuffle during curation.
pub const CURATION_SPLIT_STREAM: u64 = (1 << 62) + 1;

fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256** keyed by `(master_seed, stream_id)`.
///
/// State derivation: `x = master_seed ^ mix(stream_id + γ)`, then the four
/// state words are successive SplitMix64 outputs starting from `x`
/// (`x += γ; word = mix(x)`), where `mix` is the SplitMix64 finalizer and
/// `γ = 0x9E3779B97F4A7C15`.
#[derive(Debug, Clone)]
pub struct DeterministicRng {
    inner: Xoshiro256StarStar,
}

impl DeterministicRng {
    pub fn for_stream(master_seed: u64, stream_id: u64) -> Self {
        let mut x = master_seed ^ splitmix64_mix(stream_id.wrapping_add(GOLDEN_GAMMA));
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            x = x.wrapping_add(GOLDEN_GAMMA);
            chunk.copy_from_slice(&splitmix64_mix(x).to_le_bytes());
        }
        Self {
            inner: Xoshiro256StarStar::from_seed(seed),
        }
    }

    /// Stream for pose sampling of frame `index`.
    pub fn pose_stream(master_seed: u64, index: u64) -> Self {
        Self::for_stream(master_seed, index)
    }

    /// Stream for augmentation draws of frame `index`.
    pub fn augment_stream(master_seed: u64, index: u64) -> Self {
        Self::for_stream(master_seed, index | AUGMENT_STREAM_BIT)
    }

    /// Uniform in `[0, 1)` with 53 bits: `(next_u64 >> 11) · 2⁻⁵³`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Pair of independent standard normals (Box–Muller).
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

impl RngCore for DeterministicRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
