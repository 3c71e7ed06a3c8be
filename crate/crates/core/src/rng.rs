//! Seeded random streams.
//!
//! All randomness in the crate flows from ChaCha8 streams seeded through
//! [`stream`]. Independent tasks (firms, trees, folds) use
//! `derive(seed, ordinal) = seed + ordinal` so that parallel and serial
//! runs draw identical numbers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive(seed: u64, ordinal: usize) -> u64 {
    seed.wrapping_add(ordinal as u64)
}

/// `count` distinct draws from `pool`, in draw order.
pub fn sample_without_replacement<T: Copy>(rng: &mut Rng, pool: &[T], count: usize) -> Vec<T> {
    let mut v = pool.to_vec();
    let count = count.min(v.len());
    let (head, _) = v.partial_shuffle(rng, count);
    head.to_vec()
}

pub fn shuffled<T: Copy>(rng: &mut Rng, items: &[T]) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}
