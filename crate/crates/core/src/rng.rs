//! Seeded generator construction.
//!
//! All samplers take an explicit `&mut impl Rng`. Experiments derive one
//! ChaCha8 stream per replication from `(seed, replication)` so results do
//! not depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const RNG_NAME: &str = "ChaCha8";

pub fn from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream for replication `index` under master `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
