mod beam;
mod model;
mod reg;
mod train;

pub use beam::{beam_search, greedy, BeamConfig, Hypothesis, StepScorer};
pub use model::{
    Adapter, AdapterConfig, ModelConfig, Seq2SeqArch, TranslationModel, TransferScope,
};
pub use reg::{reg_penalty, RegKind, RegularizerConfig};
pub use train::{
    corpus_bleu_ids, finetune, prepare_batches, FinetuneConfig, FinetuneReport, MetricRecord,
    ModelScorer,
};
