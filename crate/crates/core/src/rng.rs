//! Seeded random streams.
//!
//! Every consumer of randomness derives its generator from a base seed, a
//! domain tag and an index, so that blocks, trials and pairs can be produced
//! in any order (or in parallel) without changing the results.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Domain tags keep the streams of different consumers disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Signs = 0x5349_474e,
    Synthetic = 0x5359_4e54,
    Subsample = 0x5355_4253,
    Trial = 0x5452_4941,
    Bench = 0x4245_4e43,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 64-bit seed of substream `index` in `domain`.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ domain as u64).wrapping_add(splitmix64(index)))
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, domain, index))
}

/// Uniform integer in `0..range` (Lemire's multiply-and-reject method).
#[inline]
pub fn bounded_u32<R: RngCore + ?Sized>(rng: &mut R, range: u32) -> u32 {
    let word = rng.next_u32();
    bounded_from_word(word, range, rng)
}

/// [`bounded_u32`] starting from an already drawn `word`; `rng` is only
/// consulted on the rare rejection.
#[inline]
pub fn bounded_from_word<R: RngCore + ?Sized>(word: u32, range: u32, rng: &mut R) -> u32 {
    debug_assert!(range > 0);
    let mut m = u64::from(word) * u64::from(range);
    if (m as u32) < range {
        let threshold = range.wrapping_neg() % range;
        while (m as u32) < threshold {
            m = u64::from(rng.next_u32()) * u64::from(range);
        }
    }
    (m >> 32) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map(|_| substream(7, Domain::Signs, 3).next_u64())
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(
            derive_seed(7, Domain::Signs, 3),
            derive_seed(7, Domain::Signs, 4)
        );
        assert_ne!(
            derive_seed(7, Domain::Signs, 3),
            derive_seed(7, Domain::Trial, 3)
        );
        assert_ne!(
            derive_seed(7, Domain::Signs, 3),
            derive_seed(8, Domain::Signs, 3)
        );
    }

    #[test]
    fn bounded_is_in_range_and_roughly_uniform() {
        let mut rng = substream(1, Domain::Signs, 0);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            let v = bounded_u32(&mut rng, 7) as usize;
            counts[v] += 1;
        }
        // 10_000 expected per cell, sd ~ 93
        for c in counts {
            assert!((c as i64 - 10_000).abs() < 500, "{counts:?}");
        }
        assert_eq!(bounded_u32(&mut rng, 1), 0);
    }
}
