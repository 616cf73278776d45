use crate::error::{Error, Result};
use crate::game::{sample_confounders, sample_round, Agent, FeatureSet, GameRound};
use crate::nn::{Adam, AdamConfig, Graph, ParamStore};
use crate::rng::{seeded, RunRng};

#[derive(Clone, Debug, PartialEq)]
pub struct EcTrainConfig {
    pub k_train: usize,
    pub k_eval: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub eval_every: usize,
    pub eval_rounds: usize,
    pub eval_seed: u64,
    /// Stop after the first evaluation that reaches this accuracy.
    pub stop_at_accuracy: Option<f64>,
    pub adam: AdamConfig,
}

impl Default for EcTrainConfig {
    fn default() -> Self {
        Self {
            k_train: 31,
            k_eval: 31,
            batch_size: 32,
            steps: 3000,
            eval_every: 50,
            eval_rounds: 400,
            eval_seed: 0,
            stop_at_accuracy: None,
            adam: AdamConfig::default(),
        }
    }
}

/// Receives every evaluated checkpoint while training runs, together with
/// the run generator as it stands at that point.
pub trait CheckpointSink {
    fn accept(&mut self, step: usize, accuracy: f64, agent: &Agent, rng: &RunRng) -> Result<()>;
}

impl<F: FnMut(usize, f64, &Agent) -> Result<()>> CheckpointSink for F {
    fn accept(&mut self, step: usize, accuracy: f64, agent: &Agent, _: &RunRng) -> Result<()> {
        self(step, accuracy, agent)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// `(step, eval accuracy)` for every emitted checkpoint.
    pub checkpoints: Vec<(usize, f64)>,
    /// Training loss per optimizer step.
    pub losses: Vec<f64>,
    pub mean_message_len: Vec<f64>,
}

/// Fixed evaluation rounds: targets cycle through the set, confounders come
/// from a generator seeded with `seed`.
pub fn eval_rounds(n: usize, k: usize, rounds: usize, seed: u64) -> Result<Vec<GameRound>> {
    let mut rng = seeded(seed);
    (0..rounds)
        .map(|i| sample_confounders(&mut rng, n, k, i % n))
        .collect()
}

/// Fraction of `rounds` where the listener's top-scoring candidate is the
/// target. Messages are noiseless argmax, no dropout.
pub fn evaluate_accuracy(
    agent: &Agent,
    features: &FeatureSet,
    rounds: &[GameRound],
) -> Result<f64> {
    if rounds.is_empty() {
        return Err(Error::invalid("no evaluation rounds"));
    }
    const CHUNK: usize = 100;
    let mut correct = 0;
    for chunk in rounds.chunks(CHUNK) {
        let mut g = Graph::eval(&agent.params);
        correct += agent.arch.play(&mut g, features, chunk)?.correct;
    }
    Ok(correct as f64 / rounds.len() as f64)
}

/// Trains one agent on the referential game. A checkpoint (with evaluation
/// accuracy on `valid`) is handed to `sink` at step 0 and then every
/// `eval_every` optimizer steps.
pub fn train_agent(
    agent: &mut Agent,
    train: &FeatureSet,
    valid: &FeatureSet,
    cfg: &EcTrainConfig,
    rng: &mut RunRng,
    sink: &mut dyn CheckpointSink,
) -> Result<TrainReport> {
    train.require_rounds(cfg.k_train)?;
    valid.require_rounds(cfg.k_eval)?;
    if cfg.batch_size == 0 || cfg.eval_every == 0 || cfg.eval_rounds == 0 {
        return Err(Error::invalid(
            "batch size, eval cadence and eval rounds must be positive",
        ));
    }
    let rounds = eval_rounds(valid.len(), cfg.k_eval, cfg.eval_rounds, cfg.eval_seed)?;
    let mut report = TrainReport::default();
    let mut adam = Adam::new(cfg.adam);

    let mut emit = |step: usize, agent: &Agent, rng: &RunRng, report: &mut TrainReport| -> Result<bool> {
        let acc = evaluate_accuracy(agent, valid, &rounds)?;
        report.checkpoints.push((step, acc));
        sink.accept(step, acc, agent, rng)?;
        Ok(cfg.stop_at_accuracy.is_some_and(|t| acc >= t))
    };

    if emit(0, agent, rng, &mut report)? {
        return Ok(report);
    }
    for step in 1..=cfg.steps {
        let batch: Vec<GameRound> = (0..cfg.batch_size)
            .map(|_| sample_round(rng, train.len(), cfg.k_train))
            .collect::<Result<_>>()?;
        let dropout = agent.arch.config.dropout;
        let (loss, grads, mean_len) = {
            let mut g = Graph::train(&agent.params, rng, dropout);
            let out = agent.arch.play(&mut g, train, &batch)?;
            let loss = f64::from(g.tape.scalar(out.loss));
            let mean_len = out.message_lengths.iter().sum::<usize>() as f64
                / out.message_lengths.len() as f64;
            (loss, g.backward(out.loss)?, mean_len)
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("game loss at step {step}")));
        }
        agent.params.accumulate_grads(&grads)?;
        adam.step(&mut agent.params)?;
        report.losses.push(loss);
        report.mean_message_len.push(mean_len);
        if step % cfg.eval_every == 0 && emit(step, agent, rng, &mut report)? {
            break;
        }
    }
    Ok(report)
}

/// Index of the checkpoint whose accuracy is closest to `target`; ties go to
/// the earliest entry. `None` for an empty list.
pub fn checkpoint_at_accuracy(checkpoints: &[(usize, f64)], target: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(_, acc)) in checkpoints.iter().enumerate() {
        let d = (acc - target).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Streaming selection for several accuracy targets at once: keeps, per
/// target, a copy of the parameters of the closest checkpoint seen so far.
#[derive(Clone, Debug)]
pub struct AccuracyTargets {
    targets: Vec<f64>,
    best: Vec<Option<(usize, f64, ParamStore)>>,
}

impl AccuracyTargets {
    pub fn new(targets: &[f64]) -> Self {
        Self {
            targets: targets.to_vec(),
            best: vec![None; targets.len()],
        }
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(step, accuracy, params)` selected for target `i`.
    pub fn selected(&self, i: usize) -> Option<(usize, f64, &ParamStore)> {
        self.best[i].as_ref().map(|(s, a, p)| (*s, *a, p))
    }
}

impl CheckpointSink for AccuracyTargets {
    fn accept(&mut self, step: usize, accuracy: f64, agent: &Agent, _: &RunRng) -> Result<()> {
        for (t, slot) in self.targets.iter().zip(&mut self.best) {
            let closer = match slot {
                None => true,
                Some((_, a, _)) => (accuracy - t).abs() < (*a - t).abs(),
            };
            if closer {
                *slot = Some((step, accuracy, agent.params.snapshot(|_| true)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closest_accuracy_prefers_earliest_tie() {
        let ck = [(0, 0.1), (50, 0.5), (100, 0.7), (150, 0.9), (200, 0.7)];
        assert_eq!(checkpoint_at_accuracy(&ck, 0.5), Some(1));
        assert_eq!(checkpoint_at_accuracy(&ck, 0.72), Some(2));
        assert_eq!(checkpoint_at_accuracy(&ck, 0.99), Some(3));
        assert_eq!(checkpoint_at_accuracy(&ck, 0.6), Some(1));
        assert_eq!(checkpoint_at_accuracy(&[], 0.6), None);
    }

    #[test]
    fn monotone_curve_gives_increasing_steps() {
        let ck: Vec<(usize, f64)> = (0..40).map(|i| (i * 50, 1.0 - 0.9f64.powi(i as i32))).collect();
        let picks: Vec<usize> = [0.5, 0.8, 0.95]
            .iter()
            .map(|&t| ck[checkpoint_at_accuracy(&ck, t).unwrap()].0)
            .collect();
        assert!(picks[0] < picks[1] && picks[1] < picks[2], "{picks:?}");
    }

    #[test]
    fn eval_rounds_are_fixed_by_seed() {
        let a = eval_rounds(50, 5, 30, 9).unwrap();
        assert_eq!(a, eval_rounds(50, 5, 30, 9).unwrap());
        assert_ne!(a, eval_rounds(50, 5, 30, 10).unwrap());
        assert!(a.iter().enumerate().all(|(i, r)| r.target == i % 50));
    }
}
