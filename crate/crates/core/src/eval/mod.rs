mod bleu;

pub use bleu::{bleu4, BleuReport};

use crate::error::Result;
use crate::game::{eval_rounds, evaluate_accuracy, Agent, FeatureSet};

/// Referential-game accuracy over `rounds` fixed rounds with `k_eval`
/// distractors each. Rounds are drawn from a generator seeded with `seed`, so
/// repeated calls on the same checkpoint agree.
pub fn game_accuracy(
    agent: &Agent,
    features: &FeatureSet,
    k_eval: usize,
    rounds: usize,
    seed: u64,
) -> Result<f64> {
    features.require_rounds(k_eval)?;
    let rounds = eval_rounds(features.len(), k_eval, rounds, seed)?;
    evaluate_accuracy(agent, features, &rounds)
}
