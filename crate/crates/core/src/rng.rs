//! Counter-based random numbers for reproducible parallel Monte Carlo.
//!
//! Every draw is a pure function of `(seed, path, step, channel)` computed with
//! Philox4x32-10, so results never depend on how paths are scheduled across
//! workers, and two strategies replayed on the same key see the same noise.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(ctr[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Independent noise streams consumed by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Channel {
    PriceNoise = 0,
    AskFill = 1,
    BidFill = 2,
}

/// Keyed generator; cheap to copy and free of mutable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: [seed as u32, (seed >> 32) as u32] }
    }

    fn block(&self, path: u64, step: u32, channel: Channel) -> [u32; 4] {
        philox4x32_10([step, channel as u32, path as u32, (path >> 32) as u32], self.key)
    }

    /// Two independent 64-bit words for this key.
    pub fn words(&self, path: u64, step: u32, channel: Channel) -> (u64, u64) {
        let b = self.block(path, step, channel);
        (u64::from(b[0]) | (u64::from(b[1]) << 32), u64::from(b[2]) | (u64::from(b[3]) << 32))
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&self, path: u64, step: u32, channel: Channel) -> f64 {
        to_unit(self.words(path, step, channel).0)
    }

    /// Standard normal via Box-Muller on one Philox block.
    pub fn normal(&self, path: u64, step: u32, channel: Channel) -> f64 {
        let (w0, w1) = self.words(path, step, channel);
        // (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - to_unit(w0);
        let u2 = to_unit(w1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

fn to_unit(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors shipped with Random123 (kat_vectors, philox4x32_10).
    #[test]
    fn philox_known_answers() {
        assert_eq!(
            philox4x32_10([0, 0, 0, 0], [0, 0]),
            [0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344],
                [0xa4093822, 0x299f31d0]
            ),
            [0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1]
        );
    }

    #[test]
    fn channels_and_paths_are_distinct() {
        let rng = CounterRng::new(42);
        let a = rng.uniform(0, 0, Channel::AskFill);
        let b = rng.uniform(0, 0, Channel::BidFill);
        let c = rng.uniform(1, 0, Channel::AskFill);
        let d = rng.uniform(0, 1, Channel::AskFill);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, CounterRng::new(42).uniform(0, 0, Channel::AskFill));
        assert_ne!(a, CounterRng::new(43).uniform(0, 0, Channel::AskFill));
    }

    #[test]
    fn uniform_moments() {
        let rng = CounterRng::new(7);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for i in 0..n {
            let u = rng.uniform(i, 3, Channel::AskFill);
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sq += u * u;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        // 4 standard errors.
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 1e-3);
    }

    #[test]
    fn normal_moments() {
        let rng = CounterRng::new(11);
        let n = 200_000u64;
        let xs: Vec<f64> =
            (0..n).map(|i| rng.normal(i / 1000, (i % 1000) as u32, Channel::PriceNoise)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let kurt = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64 / (var * var);
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.015);
        assert!((kurt - 3.0).abs() < 0.06);
    }
}
