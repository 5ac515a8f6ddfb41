//! Seeding helpers.
//!
//! Every stochastic entry point takes a `u64` master seed. Replicates get
//! independent ChaCha streams derived from the master seed and the replicate
//! index, so a batch of replicates is reproducible regardless of how the
//! batch is scheduled across worker threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// RNG for a single-run entry point.
pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for replicate `index` under `master_seed`.
///
/// Uses the ChaCha stream mechanism: same key, distinct stream id. Streams
/// never overlap, so replicate results do not depend on scheduling order.
pub fn replicate_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Fresh master seed from OS entropy, for callers that did not pin one.
pub fn entropy_seed() -> u64 {
    rand::random()
}
