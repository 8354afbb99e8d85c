//! Small deterministic RNG used for fidelity sampling.
//!
//! SplitMix64 is counter-addressable: the stream for sample `n` can be opened
//! directly from `(seed, n)` without generating the preceding samples, so
//! results do not depend on how work is batched.

/// SplitMix64 generator state.
#[derive(Debug, Clone, Copy)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream opened at counter position `n` for a base seed.
    pub fn at(seed: u64, n: u64) -> Self {
        Self { state: seed.wrapping_add(n.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_F42D_4C95_7F2D) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in the half-open interval (0, 1]; never returns 0 so it is
    /// safe under a logarithm.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) + f64::MIN_POSITIVE
    }

    /// One pair of independent standard normals (Box-Muller).
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }
}
