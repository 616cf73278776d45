//! End-to-end stages shared by the command-line tool and the experiment
//! tests: pretraining with on-disk checkpoint streams, fine-tuning from
//! files, test-set translation and the two sweeps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{bleu4, BleuReport};
use crate::game::{
    checkpoint_at_accuracy, train_agent, Agent, AgentConfig, CheckpointSink, FeatureSet, TrainReport,
};
use crate::io::{load_stage, save_checkpoint, CheckpointMeta, RunConfig, Stage};
use crate::nmt::{finetune, AdapterConfig, FinetuneReport, MetricRecord, ModelConfig, TranslationModel};
use crate::nn::ParamStore;
use crate::rng::{seeded, state_string, RunRng};
use crate::textdata::{normalize, ParallelCorpus, Tokenizer, Vocab, BpeModel};

/// Loads `<prefix>.bpe` and `<prefix>.vocab`.
pub fn load_tokenizer(prefix: &Path) -> Result<Tokenizer> {
    Ok(Tokenizer {
        bpe: BpeModel::load(&with_ext(prefix, "bpe"))?,
        vocab: Vocab::load(&with_ext(prefix, "vocab"))?,
    })
}

pub fn save_tokenizer(tok: &Tokenizer, prefix: &Path) -> Result<()> {
    tok.bpe.save(&with_ext(prefix, "bpe"))?;
    tok.vocab.save(&with_ext(prefix, "vocab"))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn agent_dims(c: &AgentConfig) -> BTreeMap<String, usize> {
    [
        ("vocab", c.vocab_size),
        ("feature_dim", c.feature_dim),
        ("embed_dim", c.embed_dim),
        ("hidden_dim", c.hidden_dim),
        ("l_max", c.max_len),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Rebuilds an agent from an `ec_agent` checkpoint; training-only settings
/// (temperature, dropout) come from `cfg`.
pub fn load_agent(path: &Path, cfg: &RunConfig) -> Result<(Agent, CheckpointMeta)> {
    let (params, meta) = load_stage(path, Stage::EcAgent)?;
    let config = AgentConfig {
        embed_dim: meta.dim("embed_dim")?,
        hidden_dim: meta.dim("hidden_dim")?,
        temperature: cfg.temperature,
        dropout: cfg.dropout_ec,
        ..AgentConfig::new(meta.dim("vocab")?, meta.dim("feature_dim")?, meta.dim("l_max")?)
    };
    Ok((Agent::from_params(config, params)?, meta))
}

/// Sidecar for a fine-tuned translation model.
pub fn nmt_meta(model: &TranslationModel, record: &MetricRecord, cfg: &RunConfig, rng_state: String) -> CheckpointMeta {
    let c = &model.arch.config;
    let mut dims: BTreeMap<String, usize> = [
        ("src_vocab", c.src_vocab),
        ("tgt_vocab", c.tgt_vocab),
        ("embed_dim", c.embed_dim),
        ("hidden_dim", c.hidden_dim),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    if let Some(a) = c.adapter {
        dims.insert("adapter_bottleneck".into(), a.bottleneck);
    }
    CheckpointMeta {
        stage: Stage::Nmt,
        step: record.step,
        eval_accuracy: None,
        valid_bleu: Some(record.valid_bleu),
        config_hash: cfg.hash(),
        rng_state,
        dims,
    }
}

/// Rebuilds a translation model from an `nmt` checkpoint.
pub fn load_model(path: &Path) -> Result<(TranslationModel, CheckpointMeta)> {
    let (params, meta) = load_stage(path, Stage::Nmt)?;
    let config = ModelConfig {
        embed_dim: meta.dim("embed_dim")?,
        hidden_dim: meta.dim("hidden_dim")?,
        adapter: meta.dims.get("adapter_bottleneck").map(|&b| AdapterConfig {
            bottleneck: b,
            dropout: 0.0,
        }),
        ..ModelConfig::new(meta.dim("src_vocab")?, meta.dim("tgt_vocab")?)
    };
    Ok((TranslationModel::from_params(config, params, ParamStore::new())?, meta))
}

/// One line of an EC metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcMetric {
    pub step: usize,
    pub eval_accuracy: f64,
    /// Mean training loss over the steps since the previous evaluation.
    pub train_loss: Option<f64>,
    pub mean_message_len: Option<f64>,
}

/// Writes every evaluated checkpoint of a pretraining run into a directory
/// as `step_NNNNNN.eckp` plus sidecar.
pub struct EcRunWriter {
    dir: PathBuf,
    config_hash: String,
}

impl EcRunWriter {
    pub fn create(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: cfg.hash(),
        })
    }
}

impl CheckpointSink for EcRunWriter {
    fn accept(&mut self, step: usize, accuracy: f64, agent: &Agent, rng: &RunRng) -> Result<()> {
        let meta = CheckpointMeta {
            stage: Stage::EcAgent,
            step: step as u64,
            eval_accuracy: Some(accuracy),
            valid_bleu: None,
            config_hash: self.config_hash.clone(),
            rng_state: state_string(rng),
            dims: agent_dims(agent.config()),
        };
        save_checkpoint(&self.dir.join(format!("step_{step:06}.eckp")), &agent.params, &meta)
    }
}

/// Checkpoint of a pretraining run, as listed from its directory.
#[derive(Clone, Debug, PartialEq)]
pub struct EcCheckpoint {
    pub step: usize,
    pub accuracy: f64,
    pub path: PathBuf,
}

/// Every `ec_agent` checkpoint in `dir`, by step.
pub fn list_ec_checkpoints(dir: &Path) -> Result<Vec<EcCheckpoint>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "eckp") {
            let side = crate::io::sidecar_path(&path);
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            let meta: CheckpointMeta = serde_json::from_str(&text)
                .map_err(|e| Error::format("checkpoint sidecar", e.to_string()))?;
            if let (Stage::EcAgent, Some(acc)) = (meta.stage, meta.eval_accuracy) {
                out.push(EcCheckpoint {
                    step: meta.step as usize,
                    accuracy: acc,
                    path,
                });
            }
        }
    }
    out.sort_by_key(|c| c.step);
    Ok(out)
}

/// The checkpoint whose accuracy is closest to `target` (earliest on ties).
pub fn select_ec_checkpoint(list: &[EcCheckpoint], target: f64) -> Option<&EcCheckpoint> {
    let pairs: Vec<(usize, f64)> = list.iter().map(|c| (c.step, c.accuracy)).collect();
    checkpoint_at_accuracy(&pairs, target).map(|i| &list[i])
}

/// Pretrains a fresh agent. The generator seeded with `seed` drives
/// initialization and then training.
pub fn pretrain(
    cfg: &RunConfig,
    vocab_size: usize,
    train: &FeatureSet,
    valid: &FeatureSet,
    seed: u64,
    sink: &mut dyn CheckpointSink,
) -> Result<(Agent, TrainReport)> {
    let mut rng = seeded(seed);
    let mut agent = Agent::new(cfg.agent(vocab_size, train.dim()), &mut rng)?;
    let report = train_agent(&mut agent, train, valid, &cfg.ec_train(), &mut rng, sink)?;
    Ok((agent, report))
}

/// Per-evaluation metrics from a pretraining report.
pub fn ec_metrics(report: &TrainReport) -> Vec<EcMetric> {
    let mut prev = 0;
    report
        .checkpoints
        .iter()
        .map(|&(step, acc)| {
            let window = prev..step.min(report.losses.len());
            prev = step;
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            EcMetric {
                step,
                eval_accuracy: acc,
                train_loss: mean(&report.losses[window.clone()]),
                mean_message_len: mean(&report.mean_message_len[window]),
            }
        })
        .collect()
}

/// Writes one JSON object per line.
pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Tokenized translation data: training and validation pairs plus test
/// sources with their (normalized) text references.
#[derive(Clone, Debug)]
pub struct TranslationTask {
    pub src_tok: Tokenizer,
    pub tgt_tok: Tokenizer,
    pub train: ParallelCorpus,
    pub valid: ParallelCorpus,
    pub test_src: Vec<Vec<usize>>,
    pub test_refs: Vec<String>,
}

/// Parallel text, `(source lines, target lines)`.
pub type TextPairs = (Vec<String>, Vec<String>);

impl TranslationTask {
    pub fn new(src_tok: Tokenizer, tgt_tok: Tokenizer, train: &TextPairs, valid: &TextPairs, test: &TextPairs) -> Result<Self> {
        if test.0.len() != test.1.len() {
            return Err(Error::invalid("test sides differ in length"));
        }
        Ok(Self {
            train: ParallelCorpus::encode(&src_tok, &tgt_tok, &train.0, &train.1)?,
            valid: ParallelCorpus::encode(&src_tok, &tgt_tok, &valid.0, &valid.1)?,
            test_src: test.0.iter().map(|l| src_tok.encode(l)).collect(),
            test_refs: test.1.iter().map(|l| normalize(l)).collect(),
            src_tok,
            tgt_tok,
        })
    }

    /// Learns both tokenizers on the training side.
    pub fn learn(train: &TextPairs, valid: &TextPairs, test: &TextPairs, merges: usize) -> Result<Self> {
        let src_tok = Tokenizer::learn(&train.0, merges)?;
        let tgt_tok = Tokenizer::learn(&train.1, merges)?;
        Self::new(src_tok, tgt_tok, train, valid, test)
    }

    /// Stable digest of the token data, for content-addressed sweep cells.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for side in [&self.train.src, &self.train.tgt, &self.valid.src, &self.valid.tgt, &self.test_src] {
            for s in side {
                for id in s {
                    h.update((*id as u32).to_le_bytes());
                }
                h.update(u32::MAX.to_le_bytes());
            }
        }
        for r in &self.test_refs {
            h.update(r.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// Translates token-id sources to text, with beam search when `beam > 1`.
pub fn translate(model: &TranslationModel, tgt_vocab: &Vocab, sources: &[Vec<usize>], beam: usize, max_len: usize) -> Result<Vec<String>> {
    let ids = if beam <= 1 {
        model.greedy_translate(sources, max_len)?
    } else {
        sources
            .iter()
            .map(|s| model.beam_translate(s, beam, max_len))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ids.iter().map(|s| tgt_vocab.decode(s)).collect())
}

#[derive(Clone, Debug)]
pub struct FinetuneOutcome {
    pub model: TranslationModel,
    pub report: FinetuneReport,
    pub test: BleuReport,
    pub hypotheses: Vec<String>,
}

/// Builds the translation model (from the two agents, or randomly when
/// `agents` is `None` or `cfg.transfer` is off), fine-tunes it and scores
/// the test set with beam search.
pub fn run_finetune(
    cfg: &RunConfig,
    task: &TranslationTask,
    agents: Option<(&Agent, &Agent)>,
    seed: u64,
    on_best: &mut dyn FnMut(&MetricRecord, &ParamStore, &RunRng) -> Result<()>,
) -> Result<FinetuneOutcome> {
    let mut rng = seeded(seed);
    let config = cfg.model(task.src_tok.vocab_size(), task.tgt_tok.vocab_size());
    let mut model = match agents {
        Some((s, t)) if cfg.transfer => TranslationModel::assemble(s, t, config, &mut rng)?,
        _ => TranslationModel::random(config, &mut rng)?,
    };
    let ft = cfg.finetune();
    let report = finetune(&mut model, &task.train, &task.valid, &task.tgt_tok.vocab, &ft, &mut rng, on_best)?;
    let hypotheses = translate(&model, &task.tgt_tok.vocab, &task.test_src, cfg.beam, cfg.max_len)?;
    let test = bleu4(&hypotheses, &task.test_refs)?;
    Ok(FinetuneOutcome {
        model,
        report,
        test,
        hypotheses,
    })
}

/// Cached result of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub test_bleu: f64,
    pub best_epoch: usize,
    pub best_valid_bleu: f64,
}

/// Runs `job` unless `work/cells/<key>.json` already holds its result.
pub fn cached_cell(work: &Path, key: &str, job: impl FnOnce() -> Result<CellResult>) -> Result<CellResult> {
    let dir = work.join("cells");
    let path = dir.join(format!("{key}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(r) = serde_json::from_str(&text) {
            return Ok(r);
        }
    }
    let r = job()?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let tmp = dir.join(format!("{key}.json.tmp"));
    std::fs::write(&tmp, serde_json::to_string(&r).expect("cell serializes")).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(r)
}

fn digest_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn cell_of(outcome: &FinetuneOutcome) -> CellResult {
    CellResult {
        test_bleu: outcome.test.bleu,
        best_epoch: outcome.report.best_epoch,
        best_valid_bleu: outcome.report.best_valid_bleu,
    }
}

/// One agent picked for a sweep target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selected {
    pub target: f64,
    pub step: usize,
    pub accuracy: f64,
}

/// One fine-tuning run of the accuracy grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub src: Option<Selected>,
    pub tgt: Option<Selected>,
    /// `None` when either agent is missing at its target.
    pub test_bleu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyGrid {
    pub src_targets: Vec<f64>,
    pub tgt_targets: Vec<f64>,
    /// Row-major `[src][tgt]`.
    pub cells: Vec<GridCell>,
}

impl AccuracyGrid {
    pub fn cell(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[i * self.tgt_targets.len() + j]
    }

    /// Rows are source targets, columns target targets; absent cells are
    /// left empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["src_accuracy\\tgt_accuracy".to_string()];
        header.extend(self.tgt_targets.iter().map(|t| t.to_string()));
        w.write_record(&header).expect("in-memory write");
        for (i, s) in self.src_targets.iter().enumerate() {
            let mut row = vec![s.to_string()];
            for j in 0..self.tgt_targets.len() {
                row.push(self.cell(i, j).test_bleu.map(|b| format!("{b:.4}")).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// One row per cell with the selected steps and achieved accuracies.
    pub fn to_long_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["src_target", "src_step", "src_accuracy", "tgt_target", "tgt_step", "tgt_accuracy", "test_bleu"])
            .expect("in-memory write");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for (i, st) in self.src_targets.iter().enumerate() {
            for (j, tt) in self.tgt_targets.iter().enumerate() {
                let c = self.cell(i, j);
                w.write_record([
                    st.to_string(),
                    opt(c.src.as_ref().map(|s| s.step.to_string())),
                    opt(c.src.as_ref().map(|s| format!("{:.4}", s.accuracy))),
                    tt.to_string(),
                    opt(c.tgt.as_ref().map(|s| s.step.to_string())),
                    opt(c.tgt.as_ref().map(|s| format!("{:.4}", s.accuracy))),
                    opt(c.test_bleu.map(|b| format!("{b:.4}"))),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn pick(list: &[EcCheckpoint], target: f64, band: f64) -> Option<&EcCheckpoint> {
    select_ec_checkpoint(list, target).filter(|c| (c.accuracy - target).abs() <= band)
}

/// Fine-tunes every pairing of a source-agent checkpoint near each of
/// `src_targets` with a target-agent checkpoint near each of `tgt_targets`.
/// Targets without a checkpoint within `cfg.accuracy_band` leave their
/// cells absent. Finished cells are cached under `work`.
pub fn sweep_accuracy(
    cfg: &RunConfig,
    task: &TranslationTask,
    src_run: &Path,
    tgt_run: &Path,
    src_targets: &[f64],
    tgt_targets: &[f64],
    work: &Path,
) -> Result<AccuracyGrid> {
    let src_list = list_ec_checkpoints(src_run)?;
    let tgt_list = list_ec_checkpoints(tgt_run)?;
    let task_digest = task.digest();
    let mut cells = Vec::with_capacity(src_targets.len() * tgt_targets.len());
    for &st in src_targets {
        for &tt in tgt_targets {
            let s = pick(&src_list, st, cfg.accuracy_band);
            let t = pick(&tgt_list, tt, cfg.accuracy_band);
            let sel = |c: Option<&EcCheckpoint>, target| {
                c.map(|c| Selected {
                    target,
                    step: c.step,
                    accuracy: c.accuracy,
                })
            };
            let test_bleu = match (s, t) {
                (Some(s), Some(t)) => {
                    let key = digest_parts(&[
                        b"sweep-accuracy",
                        cfg.hash().as_bytes(),
                        task_digest.as_bytes(),
                        file_digest(&s.path)?.as_bytes(),
                        file_digest(&t.path)?.as_bytes(),
                    ]);
                    let r = cached_cell(work, &key, || {
                        let (sa, _) = load_agent(&s.path, cfg)?;
                        let (ta, _) = load_agent(&t.path, cfg)?;
                        let out = run_finetune(cfg, task, Some((&sa, &ta)), cfg.ft_seed, &mut |_, _, _| Ok(()))?;
                        Ok(cell_of(&out))
                    })?;
                    Some(r.test_bleu)
                }
                _ => None,
            };
            cells.push(GridCell {
                src: sel(s, st),
                tgt: sel(t, tt),
                test_bleu,
            });
        }
    }
    Ok(AccuracyGrid {
        src_targets: src_targets.to_vec(),
        tgt_targets: tgt_targets.to_vec(),
        cells,
    })
}

/// One row of the message-length sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxLenRow {
    pub l_max: usize,
    pub src_accuracy: f64,
    pub tgt_accuracy: f64,
    pub test_bleu: f64,
    /// Either agent ended further than the accuracy band from the target.
    pub flagged: bool,
}

pub fn maxlen_csv(rows: &[MaxLenRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["l_max", "src_accuracy", "tgt_accuracy", "test_bleu", "flagged"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.l_max.to_string(),
            format!("{:.4}", r.src_accuracy),
            format!("{:.4}", r.tgt_accuracy),
            format!("{:.4}", r.test_bleu),
            r.flagged.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Streaming sink that keeps the checkpoint closest to one accuracy target.
struct ClosestTo {
    target: f64,
    best: Option<(usize, f64, ParamStore)>,
}

impl CheckpointSink for ClosestTo {
    fn accept(&mut self, step: usize, accuracy: f64, agent: &Agent, _: &RunRng) -> Result<()> {
        let closer = self
            .best
            .as_ref()
            .is_none_or(|(_, a, _)| (accuracy - self.target).abs() < (a - self.target).abs());
        if closer {
            self.best = Some((step, accuracy, agent.params.clone()));
        }
        Ok(())
    }
}

/// Pretrains an agent and returns the parameters of the checkpoint closest
/// to `target` (with its accuracy).
pub fn pretrain_to_accuracy(
    cfg: &RunConfig,
    vocab_size: usize,
    features: (&FeatureSet, &FeatureSet),
    seed: u64,
    target: f64,
) -> Result<(Agent, f64)> {
    let mut sink = ClosestTo { target, best: None };
    let (mut agent, _) = pretrain(cfg, vocab_size, features.0, features.1, seed, &mut sink)?;
    let (_, acc, params) = sink.best.expect("step 0 is always evaluated");
    agent.params = params;
    Ok((agent, acc))
}

/// For every message length, pretrains a source agent (seed `ec_seed`) and a
/// target agent (seed `ec_seed + 1`), takes the checkpoints closest to
/// `target`, fine-tunes and scores. Rows are cached under `work`.
pub fn sweep_maxlen(
    cfg: &RunConfig,
    task: &TranslationTask,
    features: (&FeatureSet, &FeatureSet),
    l_values: &[usize],
    target: f64,
    work: &Path,
) -> Result<Vec<MaxLenRow>> {
    let feat_digest = digest_parts(&[&features.0.to_ecfv(), &features.1.to_ecfv()]);
    let task_digest = task.digest();
    let mut rows = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let mut c = cfg.clone();
        c.l_max = l;
        c.validate()?;
        let key = digest_parts(&[
            b"sweep-maxlen",
            c.hash().as_bytes(),
            target.to_string().as_bytes(),
            feat_digest.as_bytes(),
            task_digest.as_bytes(),
        ]);
        let accs_path = work.join("cells").join(format!("{key}.agents.json"));
        let mut accs = (0.0, 0.0);
        let r = cached_cell(work, &key, || {
            let (sa, s_acc) = pretrain_to_accuracy(&c, task.src_tok.vocab_size(), features, c.ec_seed, target)?;
            let (ta, t_acc) = pretrain_to_accuracy(&c, task.tgt_tok.vocab_size(), features, c.ec_seed + 1, target)?;
            accs = (s_acc, t_acc);
            std::fs::create_dir_all(work.join("cells")).map_err(|e| Error::io(work, e))?;
            std::fs::write(&accs_path, serde_json::to_string(&accs).expect("pair serializes"))
                .map_err(|e| Error::io(&accs_path, e))?;
            let out = run_finetune(&c, task, Some((&sa, &ta)), c.ft_seed, &mut |_, _, _| Ok(()))?;
            Ok(cell_of(&out))
        })?;
        if let Ok(text) = std::fs::read_to_string(&accs_path) {
            accs = serde_json::from_str(&text).map_err(|e| Error::format("sweep cache", e.to_string()))?;
        }
        let band = cfg.accuracy_band;
        rows.push(MaxLenRow {
            l_max: l,
            src_accuracy: accs.0,
            tgt_accuracy: accs.1,
            test_bleu: r.test_bleu,
            flagged: (accs.0 - target).abs() > band || (accs.1 - target).abs() > band,
        });
    }
    Ok(rows)
}
