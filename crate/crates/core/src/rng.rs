//! Reproducible random substreams.
//!
//! Every realization draws from its own ChaCha stream selected by
//! `(seed, stream)`, so results do not depend on how realizations are
//! scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream tag for ensembles that must stay independent of the LES boxes.
pub const IDS_STREAM_TAG: u64 = 1 << 62;

/// Independent generator for realization `stream` under master `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
