mod agent;
mod features;
mod round;
mod train;

pub use agent::{
    compatibility_score, compatibility_scores, game_loss, Agent, AgentArch, AgentConfig,
    GameOutput, Message, SpokenBatch, MIN_SQ_DIST,
};
pub(crate) use agent::{check_layout, row_argmax, run_masked};
pub use features::{FeatureSet, Split, SynthFeatures};
pub use round::{sample_confounders, sample_round, GameRound};
pub use train::{
    checkpoint_at_accuracy, evaluate_accuracy, eval_rounds, train_agent, AccuracyTargets,
    CheckpointSink, EcTrainConfig, TrainReport,
};
