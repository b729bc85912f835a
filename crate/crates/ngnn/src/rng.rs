//! Seeded pseudo-randomness with named stream splitting.
//!
//! All randomness in the crate flows from a single master seed. A consumer
//! never shares an `Rng` across concerns; it derives a dedicated stream with
//! [`Rng::for_stream`] so that adding draws to one code path cannot perturb
//! another. The split rule is fixed and documented:
//!
//! ```text
//! stream_seed = fnv1a64(master_seed as 8 LE bytes || label bytes)
//! state       = splitmix64 expansion of stream_seed (4 words)
//! ```
//!
//! The generator itself is xoshiro256++, which is deterministic across
//! platforms and fast enough for the sampling loads here.

use crate::hash::Fnv1a;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// xoshiro256++ generator.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
    gaussian_spare: Option<f64>,
}

impl Rng {
    /// Seed directly. States of all zeros are avoided by the splitmix expansion.
    pub fn from_seed(seed: u64) -> Self {
        let mut s = seed;
        let state = [
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
        ];
        Rng {
            state,
            gaussian_spare: None,
        }
    }

    /// Derive the named substream of a master seed (see module docs).
    pub fn for_stream(master_seed: u64, label: &str) -> Self {
        let mut h = Fnv1a::new();
        h.write(&master_seed.to_le_bytes());
        h.write(label.as_bytes());
        Rng::from_seed(h.finish())
    }

    /// Derive a numbered substream, e.g. one per epoch.
    pub fn for_substream(master_seed: u64, label: &str, index: u64) -> Self {
        let mut h = Fnv1a::new();
        h.write(&master_seed.to_le_bytes());
        h.write(label.as_bytes());
        h.write(&index.to_le_bytes());
        Rng::from_seed(h.finish())
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). Unbiased via bitmask rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is undefined");
        if n == 1 {
            return 0;
        }
        let n = n as u64;
        let mask = u64::MAX >> (n - 1).leading_zeros();
        loop {
            let x = self.next_u64() & mask;
            if x < n {
                return x as usize;
            }
        }
    }

    /// Standard normal via Box-Muller; caches the spare deviate.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.gaussian_spare.take() {
            return z;
        }
        // 1 - uniform() lies in (0, 1], keeping the log finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.gaussian_spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.below(i + 1);
            slice.swap(i, j);
        }
    }

    pub fn choose<'a, T>(&mut self, slice: &'a [T]) -> &'a T {
        &slice[self.below(slice.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Rng::from_seed(42);
        let mut b = Rng::from_seed(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_are_independent_of_sibling_draws() {
        let mut raw = Rng::for_stream(7, "negatives");
        let expected: Vec<u64> = (0..8).map(|_| raw.next_u64()).collect();

        // Consuming another stream first must not shift this one.
        let mut other = Rng::for_stream(7, "shuffle");
        let _ = other.next_u64();
        let mut again = Rng::for_stream(7, "negatives");
        let got: Vec<u64> = (0..8).map(|_| again.next_u64()).collect();
        assert_eq!(expected, got);
    }

    #[test]
    fn below_is_in_range_and_covers() {
        let mut rng = Rng::from_seed(3);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = rng.below(7);
            assert!(v < 7);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::from_seed(11);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normal_has_plausible_moments() {
        let mut rng = Rng::from_seed(5);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
