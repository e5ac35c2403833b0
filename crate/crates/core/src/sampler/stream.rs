//! Counter-based random stream: every value is a pure function of
//! `(key, counter)`, so draws can be produced in any order or on any number
//! of threads with identical results.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const EPOCH_DOMAIN: u64 = 0x5043_5552_5249_4355;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key for one epoch of one run.
pub fn epoch_seed(master_seed: u64, epoch: u64) -> u64 {
    mix64(mix64(master_seed) ^ mix64(epoch.wrapping_add(EPOCH_DOMAIN)))
}

/// The `counter`-th 64-bit word of the stream identified by `key`.
#[inline]
pub fn word(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform slot in `[0, n)` from the high bits of a 64-bit word.
#[inline]
pub fn bounded(w: u64, n: u64) -> u64 {
    ((u128::from(w) * u128::from(n)) >> 64) as u64
}

/// Uniform `f64` in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_f64(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|e| epoch_seed(7, e)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(epoch_seed(7, 0), epoch_seed(8, 0));
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
        assert_eq!(bounded(u64::MAX, 10), 9);
        assert_eq!(bounded(0, 10), 0);
    }

    #[test]
    fn words_look_uniform() {
        let n = 100_000u64;
        let mean = (0..n).map(|t| unit_f64(word(123, t))).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "{mean}");
    }
}
