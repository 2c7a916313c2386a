//! Deterministic pseudo-random numbers shared by every module.
//!
//! Reproducibility across runs, thread counts, and independent
//! reimplementations is a hard requirement for the diagnostics and the
//! super-resolution demo, so the generator is fully specified here rather
//! than delegated to an external crate whose stream may change between
//! versions.
//!
//! * Generator: SplitMix64 (Steele, Lea & Flood 2014). State advances by
//!   the 64-bit golden gamma `0x9E3779B97F4A7C15`; each output is the
//!   advanced state passed through the finalizer
//!   `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
//!    z *= 0x94D049BB133111EB; z ^= z >> 31`.
//! * Uniform doubles: the top 53 bits of an output, scaled by 2^-53,
//!   giving values in `[0, 1)`.
//! * Normal variates: Box-Muller, cosine branch only. Each call consumes
//!   exactly two uniforms `u1, u2` and returns
//!   `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
//! * Bounded integers: modulo with zone rejection (draws are discarded
//!   while below `2^64 mod bound`, then reduced modulo `bound`).
//! * Stream splitting: substream `i` of master seed `m` is a fresh
//!   SplitMix64 seeded with `mix(m ^ mix(i + 1))`, where `mix` is the
//!   finalizer above. Both mixes are bijections, so distinct indices give
//!   distinct substream seeds.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; also used to derive substream seeds.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Substream `index` of `master`; see the module docs for the formula.
    pub fn substream(master: u64, index: u64) -> Self {
        SplitMix64::new(mix(master ^ mix(index.wrapping_add(1))))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform double in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal variate via the Box-Muller cosine branch.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, bound)`. `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be nonzero");
        // 2^64 mod bound, computed without overflow.
        let zone = bound.wrapping_neg() % bound;
        loop {
            let x = self.next_u64();
            if x >= zone {
                return x % bound;
            }
        }
    }

    /// Fills `out` with standard normal variates.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.next_normal();
        }
    }

    /// `count` distinct indices from `0..n`, sampled without replacement by
    /// a partial Fisher-Yates shuffle, returned in ascending order.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Vec<usize> {
        let take = count.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..take {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool.sort_unstable();
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_range() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut rng = SplitMix64::new(7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = rng.next_normal();
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn bounded_draws_cover_range() {
        let mut rng = SplitMix64::new(3);
        let mut seen = [false; 7];
        for _ in 0..1_000 {
            seen[rng.next_below(7) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn substreams_disagree() {
        let mut a = SplitMix64::substream(0, 0);
        let mut b = SplitMix64::substream(0, 1);
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn sample_indices_distinct_sorted() {
        let mut rng = SplitMix64::new(11);
        let idx = rng.sample_indices(100, 30);
        assert_eq!(idx.len(), 30);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&i| i < 100));
        // count > n clamps to the whole set
        let all = rng.sample_indices(5, 99);
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }
}
