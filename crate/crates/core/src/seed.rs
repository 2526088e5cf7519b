use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RNG for a given experiment seed.
pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for sub-task `stream` of an experiment seeded with `seed`.
pub(crate) fn derive(seed: u64, stream: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream.wrapping_add(1));
    r.next_u64()
}
