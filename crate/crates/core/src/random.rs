//! Reproducible random streams and random tables.
//!
//! Every trial draws from its own ChaCha stream derived from `(seed, trial)`,
//! so results do not depend on how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::table::BinaryTable;

/// Half-width of the log-range for random entries: entries lie in
/// `[e^-3, e^3]`.
pub const LOG_RANGE: f64 = 3.0;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Entries i.i.d. log-uniform on `[e^-3, e^3]`.
pub fn log_uniform_table<R: Rng + ?Sized>(rng: &mut R, k: usize) -> BinaryTable {
    let entries = (0..1usize << k)
        .map(|_| rng.random_range(-LOG_RANGE..=LOG_RANGE).exp())
        .collect();
    BinaryTable::from_parts_unchecked(k, entries)
}
