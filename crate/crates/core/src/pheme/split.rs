use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pheme::{Event, Splits};

pub const MIN_SPLIT_EVENTS: usize = 10;

/// Seeded 80/10/10 shuffle split: `⌊0.8n⌋` train, `⌊0.1n⌋` valid, the rest
/// test.
pub fn split(events: &[Event], seed: u64) -> Result<Splits> {
    let n = events.len();
    if n < MIN_SPLIT_EVENTS {
        return Err(Error::TooFewEvents {
            needed: MIN_SPLIT_EVENTS,
            got: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_valid = n / 10;
    let take = |idx: &[usize]| idx.iter().map(|&i| events[i].clone()).collect();
    Ok(Splits {
        train: take(&order[..n_train]),
        valid: take(&order[n_train..n_train + n_valid]),
        test: take(&order[n_train + n_valid..]),
    })
}
