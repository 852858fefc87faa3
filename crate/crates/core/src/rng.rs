//! Per-trial random streams.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index,
//! so results do not depend on which thread runs which trial or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(base_seed: u64, trial_index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial_index);
    rng
}
