//! Deterministic pseudorandom generator.
//!
//! The generator is xoshiro256** (Blackman & Vigna), seeded by expanding a
//! 64-bit seed through splitmix64. Both algorithms are published with
//! reference implementations, so the exact draw sequence can be reproduced
//! in any language. Derived draws are pinned as follows:
//!
//! - `next_f64`: `(next_u64() >> 11) as f64 * 2^-53`, uniform in `[0, 1)`.
//! - `normal`: Box-Muller, consuming exactly two uniforms per call:
//!   `z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
//! - `below(n)`: 64-bit draws rejected while `x >= floor(2^64 / n) * n`,
//!   then reduced modulo `n`.
//! - `shuffle`: Fisher-Yates from the last index down, `j = below(i + 1)`.
//!
//! An `Rng` is single-owner: it must not be shared across threads.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// xoshiro256** generator with a 64-bit seed.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = (u64::MAX / n) * n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal via Box-Muller; two uniforms consumed per call.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        // 1 - u1 lies in (0, 1], keeping the log finite.
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TWO_PI * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// Tensor of i.i.d. normal draws in flat row-major order.
    pub fn normal_tensor(&mut self, shape: Vec<usize>, mean: f64, std: f64) -> Result<Tensor> {
        if std < 0.0 {
            return Err(Error::NegativeStd(std));
        }
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| self.normal(mean, std)).collect();
        Tensor::from_vec(shape, data)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn same_seed_same_normal_tensor() {
        let t1 = Rng::new(42).normal_tensor(vec![7, 3], 0.5, 2.0).unwrap();
        let t2 = Rng::new(42).normal_tensor(vec![7, 3], 0.5, 2.0).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn zero_std_degenerates_to_mean() {
        let t = Rng::new(9).normal_tensor(vec![100], 1.25, 0.0).unwrap();
        assert!(t.data().iter().all(|&v| v == 1.25));
    }

    #[test]
    fn negative_std_rejected() {
        assert!(Rng::new(0).normal_tensor(vec![2], 0.0, -1.0).is_err());
    }

    #[test]
    fn sample_mean_statistical_oracle() {
        // 1e5 draws: sample mean within 4*std/sqrt(n) of the true mean.
        let n = 100_000usize;
        let (mean, std) = (3.0, 2.0);
        let t = Rng::new(7).normal_tensor(vec![n], mean, std).unwrap();
        let sample_mean: f64 = t.data().iter().sum::<f64>() / n as f64;
        let bound = 4.0 * std / (n as f64).sqrt();
        assert!(
            (sample_mean - mean).abs() < bound,
            "sample mean {sample_mean} outside {mean} +/- {bound}"
        );
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = Rng::new(3);
        for _ in 0..10_000 {
            assert!(rng.below(7) < 7);
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut xs: Vec<usize> = (0..50).collect();
        Rng::new(5).shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(xs, (0..50).collect::<Vec<_>>());
    }
}
