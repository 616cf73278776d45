use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::beam::{beam_search, BeamConfig, StepScorer};
use super::model::TranslationModel;
use super::reg::{reg_penalty, RegKind, RegularizerConfig};
use crate::error::{Error, Result};
use crate::eval::bleu4;
use crate::game::row_argmax;
use crate::nn::{Adam, AdamConfig, Graph, ParamStore};
use crate::rng::RunRng;
use crate::textdata::{make_batches, Padded, ParallelCorpus, Vocab, BOS, EOS, PAD};

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub reg: RegularizerConfig,
    /// Longest sentence fed to the model, in tokens before `<eos>`.
    pub max_len: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 128,
            dropout: 0.2,
            adam: AdamConfig::default(),
            reg: RegularizerConfig::default(),
            max_len: 80,
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub step: u64,
    pub train_loss: f64,
    pub reg_value: f64,
    pub valid_loss: f64,
    pub valid_bleu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneReport {
    pub metrics: Vec<MetricRecord>,
    pub best_epoch: usize,
    pub best_valid_bleu: f64,
    pub steps: u64,
}

/// `(source, target)` padded batches with `<eos>` appended to every sentence.
pub fn prepare_batches(
    corpus: &ParallelCorpus,
    batch_size: usize,
    max_len: usize,
) -> Result<Vec<(Padded, Padded)>> {
    let with_eos = |s: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = s.iter().copied().take(max_len).collect();
        v.push(EOS);
        v
    };
    Ok(make_batches(corpus, batch_size)?
        .into_iter()
        .map(|b| {
            let src: Vec<Vec<usize>> = b.indices.iter().map(|&i| with_eos(&corpus.src[i])).collect();
            let tgt: Vec<Vec<usize>> = b.indices.iter().map(|&i| with_eos(&corpus.tgt[i])).collect();
            let src: Vec<&[usize]> = src.iter().map(Vec::as_slice).collect();
            let tgt: Vec<&[usize]> = tgt.iter().map(Vec::as_slice).collect();
            (Padded::new(&src), Padded::new(&tgt))
        })
        .collect())
}

impl TranslationModel {
    pub fn check_corpus(&self, corpus: &ParallelCorpus) -> Result<()> {
        let (s, t) = corpus.max_ids();
        let c = &self.arch.config;
        if s >= c.src_vocab || t >= c.tgt_vocab {
            return Err(Error::VocabMismatch(format!(
                "corpus ids reach {s}/{t}, model vocabularies are {}/{}",
                c.src_vocab, c.tgt_vocab
            )));
        }
        Ok(())
    }

    /// Token-weighted mean sequence loss over a corpus (eval mode).
    pub fn corpus_loss(&self, corpus: &ParallelCorpus, max_len: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for (src, tgt) in prepare_batches(corpus, 128, max_len)? {
            let mut g = Graph::eval(&self.params);
            let l = self.arch.sequence_loss(&mut g, &src, &tgt)?;
            let n: usize = tgt.lengths.iter().sum();
            total += f64::from(g.tape.scalar(l)) * n as f64;
            tokens += n;
        }
        Ok(total / tokens.max(1) as f64)
    }

    /// Greedy translations of every source sentence, batched; outputs stop
    /// before `<eos>`.
    pub fn greedy_translate(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(sources.len());
        for chunk in sources.chunks(128) {
            let rows: Vec<Vec<usize>> = chunk
                .iter()
                .map(|s| s.iter().copied().take(max_len).chain([EOS]).collect())
                .collect();
            let refs: Vec<&[usize]> = rows.iter().map(Vec::as_slice).collect();
            let src = Padded::new(&refs);
            let mut g = Graph::eval(&self.params);
            let enc = self.arch.encode(&mut g, &src)?;
            let ctx = self.arch.bridge(&mut g, enc)?;
            let mut h = self.arch.decoder_start(&mut g, ctx)?;
            let v = self.arch.config.tgt_vocab;
            let mut hyps = vec![Vec::new(); chunk.len()];
            let mut done = vec![false; chunk.len()];
            for _ in 0..max_len {
                let logits = self.arch.dec_out.forward(&mut g, h)?;
                let mut vals = g.tape.value(logits).to_vec();
                for row in vals.chunks_mut(v) {
                    row[PAD] = f32::NEG_INFINITY;
                    row[BOS] = f32::NEG_INFINITY;
                }
                let next = row_argmax(&vals, v);
                for (r, &tok) in next.iter().enumerate() {
                    if !done[r] {
                        if tok == EOS {
                            done[r] = true;
                        } else {
                            hyps[r].push(tok);
                        }
                    }
                }
                if done.iter().all(|&d| d) {
                    break;
                }
                h = self.arch.decoder_step(&mut g, h, &next)?;
            }
            out.extend(hyps);
        }
        Ok(out)
    }

    /// Beam-search translation of one source sentence (without `<eos>`).
    pub fn beam_translate(&self, source: &[usize], width: usize, max_len: usize) -> Result<Vec<usize>> {
        let scorer = ModelScorer::new(self, source, max_len)?;
        let cfg = BeamConfig {
            width,
            max_len,
            eos: EOS,
            banned: vec![PAD, BOS],
        };
        let mut toks = beam_search(&scorer, &cfg)?.tokens;
        if toks.last() == Some(&EOS) {
            toks.pop();
        }
        Ok(toks)
    }
}

/// Decoder of a translation model conditioned on one encoded source.
pub struct ModelScorer<'a> {
    model: &'a TranslationModel,
    context: Vec<f32>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a TranslationModel, source: &[usize], max_len: usize) -> Result<Self> {
        let row: Vec<usize> = source.iter().copied().take(max_len).chain([EOS]).collect();
        let src = Padded::new(&[row.as_slice()]);
        let mut g = Graph::eval(&model.params);
        let enc = model.arch.encode(&mut g, &src)?;
        let ctx = model.arch.bridge(&mut g, enc)?;
        Ok(Self {
            model,
            context: g.tape.value(ctx).to_vec(),
        })
    }

    fn log_probs(g: &mut Graph<f32>, model: &TranslationModel, h: crate::tensor::Var) -> Result<Vec<Vec<f64>>> {
        let logits = model.arch.dec_out.forward(g, h)?;
        let lp = g.tape.log_softmax(logits)?;
        let v = model.arch.config.tgt_vocab;
        Ok(g.tape
            .value(lp)
            .chunks(v)
            .map(|r| r.iter().map(|&x| f64::from(x)).collect())
            .collect())
    }
}

impl StepScorer for ModelScorer<'_> {
    type State = Vec<f32>;

    fn start(&self) -> Result<(Vec<f32>, Vec<f64>)> {
        let mut g = Graph::eval(&self.model.params);
        let hd = self.model.arch.config.hidden_dim;
        let ctx = g.constant(&[1, hd], self.context.clone())?;
        let h = self.model.arch.decoder_start(&mut g, ctx)?;
        let mut lp = Self::log_probs(&mut g, self.model, h)?;
        Ok((g.tape.value(h).to_vec(), lp.pop().expect("one row")))
    }

    fn step(&self, states: &[Vec<f32>], tokens: &[usize]) -> Result<Vec<(Vec<f32>, Vec<f64>)>> {
        let hd = self.model.arch.config.hidden_dim;
        let mut g = Graph::eval(&self.model.params);
        let h = g.constant(&[states.len(), hd], states.concat())?;
        let h = self.model.arch.decoder_step(&mut g, h, tokens)?;
        let lp = Self::log_probs(&mut g, self.model, h)?;
        Ok(g.tape.value(h).chunks(hd).map(<[f32]>::to_vec).zip(lp).collect())
    }
}

/// Corpus BLEU of `hyps` (token ids) against reference id sequences, both
/// detokenized through `vocab`.
pub fn corpus_bleu_ids(vocab: &Vocab, hyps: &[Vec<usize>], refs: &[Vec<usize>]) -> Result<f64> {
    let h: Vec<String> = hyps.iter().map(|s| vocab.decode(s)).collect();
    let r: Vec<String> = refs.iter().map(|s| vocab.decode(s)).collect();
    Ok(bleu4(&h, &r)?.bleu)
}

/// Fine-tunes `model` on `train`, validating after every epoch. The
/// parameters with the best validation BLEU are restored at the end and
/// handed to `on_best` (with the generator state) whenever they improve.
pub fn finetune(
    model: &mut TranslationModel,
    train: &ParallelCorpus,
    valid: &ParallelCorpus,
    tgt_vocab: &Vocab,
    cfg: &FinetuneConfig,
    rng: &mut RunRng,
    on_best: &mut dyn FnMut(&MetricRecord, &ParamStore, &RunRng) -> Result<()>,
) -> Result<FinetuneReport> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::invalid("empty training or validation corpus"));
    }
    model.check_corpus(train)?;
    model.check_corpus(valid)?;
    cfg.reg.validate()?;
    let mut batches = prepare_batches(train, cfg.batch_size, cfg.max_len)?;
    let mut adam = Adam::new(cfg.adam);
    let mut step: u64 = 0;
    let mut metrics = Vec::new();
    let mut best: Option<(usize, f64, ParamStore)> = None;

    for epoch in 1..=cfg.epochs {
        batches.shuffle(rng);
        let (mut loss_sum, mut reg_sum) = (0.0, 0.0);
        for (src, tgt) in &batches {
            let k = match cfg.reg.kind {
                RegKind::RegB => step + 1,
                _ => step,
            };
            let (loss, reg, grads) = {
                let mut g = Graph::train(&model.params, rng, cfg.dropout);
                let seq = model.arch.sequence_loss(&mut g, src, tgt)?;
                let loss = f64::from(g.tape.scalar(seq));
                let (total, reg) = match reg_penalty(&mut g, &cfg.reg, &model.w_star, k)? {
                    Some(r) => {
                        let rv = f64::from(g.tape.scalar(r));
                        (g.tape.add(seq, r)?, rv)
                    }
                    None => (seq, 0.0),
                };
                (loss, reg, g.backward(total)?)
            };
            if !loss.is_finite() || !reg.is_finite() {
                return Err(Error::NonFinite(format!("fine-tuning loss at step {step}")));
            }
            model.params.accumulate_grads(&grads)?;
            adam.step(&mut model.params)?;
            step += 1;
            loss_sum += loss;
            reg_sum += reg;
        }
        let n = batches.len() as f64;
        let hyps = model.greedy_translate(&valid.src, cfg.max_len)?;
        let record = MetricRecord {
            epoch,
            step,
            train_loss: loss_sum / n,
            reg_value: reg_sum / n,
            valid_loss: model.corpus_loss(valid, cfg.max_len)?,
            valid_bleu: corpus_bleu_ids(tgt_vocab, &hyps, &valid.tgt)?,
        };
        if best.as_ref().is_none_or(|(_, b, _)| record.valid_bleu > *b) {
            on_best(&record, &model.params, rng)?;
            best = Some((epoch, record.valid_bleu, model.params.snapshot(|_| true)));
        }
        metrics.push(record);
    }

    let (best_epoch, best_valid_bleu) = match best {
        Some((e, b, params)) => {
            model.params = params;
            (e, b)
        }
        None => (0, 0.0),
    };
    Ok(FinetuneReport {
        metrics,
        best_epoch,
        best_valid_bleu,
        steps: step,
    })
}
