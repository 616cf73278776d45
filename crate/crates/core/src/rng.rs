//! The run-wide random number generator.
//!
//! Every stochastic operation (initialisation, distractor sampling, Gumbel
//! noise, dropout masks, shuffling) draws from one [`RunRng`] owned by the
//! running stage, so a seed fully determines a run.

use rand::SeedableRng;

pub type RunRng = rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> RunRng {
    RunRng::seed_from_u64(seed)
}

/// Snapshot of the generator position, stored alongside checkpoints.
pub fn state_string(rng: &RunRng) -> String {
    format!(
        "chacha8:{}:{}",
        hex::encode(rng.get_seed()),
        rng.get_word_pos()
    )
}
