//! Seeded, splittable random streams.
//!
//! Every trial owns an independent ChaCha substream selected by its trial
//! index, so results do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Generator for stream `stream` under master seed `seed`.
pub fn stream(seed: u64, stream: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
