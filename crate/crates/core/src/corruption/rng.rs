//! Portable pseudo-random numbers.
//!
//! `Rng` is xoshiro256** (Blackman & Vigna) seeded by expanding a `u64` with
//! SplitMix64. Floating-point draws use only IEEE arithmetic and the `libm`
//! crate, so a given seed produces the same stream on every platform.

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLITMIX_MUL1: u64 = 0xBF58_476D_1CE4_E5B9;
const SPLITMIX_MUL2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 output function (the finalizer applied to `state + GAMMA`).
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_MUL1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_MUL2);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_add(SPLITMIX_GAMMA);
            splitmix64_mix(state)
        };
        Self {
            s: [next(), next(), next(), next()],
            spare_normal: None,
        }
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

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via the Box–Muller transform; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Poisson variate by CDF inversion of a single uniform.
    ///
    /// One uniform per draw means equal rates with the same uniform give equal
    /// counts, which the channel-coherent noise mode relies on.
    pub fn poisson_from_uniform(u: f64, rate: f64) -> u32 {
        if rate <= 0.0 {
            return 0;
        }
        let mut k = 0u32;
        let mut p = libm::exp(-rate);
        let mut cdf = p;
        // The cap only matters for u within rounding of 1.
        let cap = (rate + 40.0 * libm::sqrt(rate) + 40.0) as u32;
        while u >= cdf && k < cap {
            k += 1;
            p *= rate / k as f64;
            cdf += p;
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xoshiro_reference_stream() {
        // xoshiro256** from state {1, 2, 3, 4}; values from the reference C implementation.
        let mut r = Rng { s: [1, 2, 3, 4], spare_normal: None };
        let expected = [11520u64, 0, 1509978240, 1215971899390074240];
        for e in expected {
            assert_eq!(r.next_u64(), e);
        }
    }

    #[test]
    fn splitmix_reference() {
        // First output of SplitMix64 seeded with 0.
        assert_eq!(splitmix64_mix(SPLITMIX_GAMMA), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn uniform_moments() {
        let mut r = Rng::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| r.uniform()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn normal_moments() {
        let mut r = Rng::new(11);
        let n = 400_000;
        let xs: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn poisson_moments() {
        let mut r = Rng::new(3);
        for rate in [0.5, 4.0, 30.0, 60.0] {
            let n = 100_000;
            let xs: Vec<f64> = (0..n).map(|_| Rng::poisson_from_uniform(r.uniform(), rate) as f64).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((mean - rate).abs() < 0.03 * rate.max(1.0), "rate {rate} mean {mean}");
            assert!((var - rate).abs() < 0.05 * rate.max(1.0), "rate {rate} var {var}");
        }
        assert_eq!(Rng::poisson_from_uniform(0.3, 0.0), 0);
    }

    #[test]
    fn below_is_in_range() {
        let mut r = Rng::new(5);
        assert!((0..1000).all(|_| r.below(7) < 7));
    }
}
