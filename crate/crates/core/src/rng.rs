//! Seeded, splittable randomness.
//!
//! Every sampling routine takes its generator explicitly. Parallel work is
//! split by ChaCha stream id, so results depend only on the seed and never on
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded with `seed`. Distinct streams are
/// independent; stream 0 coincides with [`seeded`].
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng
}

/// A fresh seed drawn from `rng`, for handing to [`stream`].
pub fn derive_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

/// Seed from operating-system entropy, for runs where the caller gave none.
pub fn entropy_seed() -> u64 {
    rand::random()
}
