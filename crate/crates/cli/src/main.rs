use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecmt::error::{Error, Result};
use ecmt::eval::bleu4;
use ecmt::game::{FeatureSet, Split, SynthFeatures};
use ecmt::io::{save_checkpoint, RunConfig};
use ecmt::pipeline::{
    ec_metrics, load_agent, load_model, load_tokenizer, maxlen_csv, nmt_meta, pretrain, run_finetune,
    save_tokenizer, sweep_accuracy, sweep_maxlen, translate, write_ndjson, EcRunWriter, TextPairs,
    TranslationTask,
};
use ecmt::rng::state_string;
use ecmt::textdata::{read_lines, write_lines, Tokenizer};

#[derive(Parser)]
#[command(name = "ecmt", version, about = "Emergent-communication pretraining for low-resource translation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set alpha=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a Gaussian-cluster feature set as ECFV train/valid files.
    FeaturesSynth {
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        valid_out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_valid: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        clusters: usize,
        #[arg(long, default_value_t = 3.0)]
        scale: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Defaults to `data_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Learn a BPE model and vocabulary (`<out>.bpe`, `<out>.vocab`).
    BpeLearn {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `bpe_merges`.
        #[arg(long)]
        merges: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Segment a text file with a learned tokenizer.
    BpeApply {
        #[arg(long)]
        tokenizer: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Write vocabulary ids instead of subword strings.
        #[arg(long)]
        ids: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train speaker/listener agents on the referential game.
    EcPretrain {
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        valid_features: PathBuf,
        /// Take the vocabulary size from this tokenizer...
        #[arg(long, conflicts_with = "vocab_size")]
        tokenizer: Option<PathBuf>,
        /// ...or give it directly.
        #[arg(long)]
        vocab_size: Option<usize>,
        /// Checkpoint directory.
        #[arg(long)]
        out_dir: PathBuf,
        /// Defaults to `ec_steps`.
        #[arg(long)]
        steps: Option<usize>,
        /// Defaults to `ec_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune a translation model, optionally from pretrained agents.
    NmtFinetune {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, requires = "tgt_agent")]
        src_agent: Option<PathBuf>,
        #[arg(long, requires = "src_agent")]
        tgt_agent: Option<PathBuf>,
        /// Random initialization (sets `transfer=false`).
        #[arg(long)]
        no_transfer: bool,
        /// Regularizer: off, na, reg_a or reg_b.
        #[arg(long)]
        reg: Option<String>,
        #[arg(long)]
        no_adapter: bool,
        /// Best-validation checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch metrics, one JSON object per line.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Test-set translations.
        #[arg(long)]
        hyp_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Translate a source file with a fine-tuned model.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        src_tok: PathBuf,
        #[arg(long)]
        tgt_tok: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Defaults to `beam`; 1 decodes greedily.
        #[arg(long)]
        beam: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Corpus BLEU-4 of a hypothesis file against a reference file.
    ScoreBleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune every pairing of agents selected near given accuracies.
    SweepAccuracy {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        src_run: PathBuf,
        #[arg(long)]
        tgt_run: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        src_targets: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        tgt_targets: Vec<f64>,
        /// Cache directory for finished cells.
        #[arg(long)]
        work: PathBuf,
        /// Grid CSV; a long-form `<out>.cells.csv` is written alongside.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain and fine-tune once per maximum message length.
    SweepMaxlen {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        valid_features: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        l_values: Vec<usize>,
        #[arg(long)]
        accuracy_target: f64,
        #[arg(long)]
        work: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Tokenizer prefixes from `bpe-learn`.
    #[arg(long)]
    src_tok: PathBuf,
    #[arg(long)]
    tgt_tok: PathBuf,
    #[arg(long)]
    train_src: PathBuf,
    #[arg(long)]
    train_tgt: PathBuf,
    #[arg(long)]
    valid_src: PathBuf,
    #[arg(long)]
    valid_tgt: PathBuf,
    #[arg(long, requires = "test_tgt")]
    test_src: Option<PathBuf>,
    #[arg(long, requires = "test_src")]
    test_tgt: Option<PathBuf>,
}

fn pairs(src: &Path, tgt: &Path) -> Result<TextPairs> {
    Ok((read_lines(src)?, read_lines(tgt)?))
}

impl DataArgs {
    fn load(&self, need_test: bool) -> Result<TranslationTask> {
        let test = match (&self.test_src, &self.test_tgt) {
            (Some(s), Some(t)) => pairs(s, t)?,
            _ if need_test => return Err(Error::Config("--test-src and --test-tgt are required".into())),
            _ => (Vec::new(), Vec::new()),
        };
        TranslationTask::new(
            load_tokenizer(&self.src_tok)?,
            load_tokenizer(&self.tgt_tok)?,
            &pairs(&self.train_src, &self.train_tgt)?,
            &pairs(&self.valid_src, &self.valid_tgt)?,
            &test,
        )
    }
}

fn config(common: &Common, extra: &[String]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&common.overrides)?;
    cfg.apply_overrides(extra)?;
    Ok(cfg)
}

fn print_json(v: serde_json::Value) {
    println!("{v}");
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::FeaturesSynth {
            train_out,
            valid_out,
            n_train,
            n_valid,
            dim,
            clusters,
            scale,
            sigma,
            seed,
            common,
        } => {
            let cfg = config(&common, &[])?;
            let spec = SynthFeatures {
                dim,
                clusters,
                scale,
                sigma,
                seed: seed.unwrap_or(cfg.data_seed),
            };
            let (train, valid) = spec.generate(n_train, n_valid)?;
            train.save(&train_out)?;
            valid.save(&valid_out)?;
            print_json(serde_json::json!({"train": n_train, "valid": n_valid, "dim": dim}));
        }
        Cmd::BpeLearn {
            input,
            out,
            merges,
            common,
        } => {
            let cfg = config(&common, &[])?;
            let lines = read_lines(&input)?;
            let tok = Tokenizer::learn(&lines, merges.unwrap_or(cfg.bpe_merges))?;
            save_tokenizer(&tok, &out)?;
            print_json(serde_json::json!({
                "merges": tok.bpe.merges().len(),
                "vocab_size": tok.vocab_size(),
                "fingerprint": tok.bpe.fingerprint,
            }));
        }
        Cmd::BpeApply {
            tokenizer,
            input,
            output,
            ids,
            common,
        } => {
            config(&common, &[])?;
            let tok = load_tokenizer(&tokenizer)?;
            let out: Vec<String> = read_lines(&input)?
                .iter()
                .map(|l| {
                    if ids {
                        let v: Vec<String> = tok.encode(l).iter().map(usize::to_string).collect();
                        v.join(" ")
                    } else {
                        tok.bpe.segment(l).join(" ")
                    }
                })
                .collect();
            write_lines(&output, &out)?;
        }
        Cmd::EcPretrain {
            train_features,
            valid_features,
            tokenizer,
            vocab_size,
            out_dir,
            steps,
            seed,
            common,
        } => {
            let extra: Vec<String> = steps.map(|s| format!("ec_steps={s}")).into_iter().collect();
            let cfg = config(&common, &extra)?;
            let vocab = match (tokenizer, vocab_size) {
                (Some(t), _) => load_tokenizer(&t)?.vocab_size(),
                (None, Some(v)) => v,
                (None, None) => return Err(Error::Config("give --tokenizer or --vocab-size".into())),
            };
            let train = FeatureSet::load(&train_features, Split::Train)?;
            let valid = FeatureSet::load(&valid_features, Split::Valid)?;
            if train.dim() != valid.dim() {
                return Err(Error::Shape {
                    op: "features",
                    shapes: format!("train dim {} vs valid dim {}", train.dim(), valid.dim()),
                });
            }
            let mut writer = EcRunWriter::create(&out_dir, &cfg)?;
            let (_, report) = pretrain(&cfg, vocab, &train, &valid, seed.unwrap_or(cfg.ec_seed), &mut writer)?;
            write_ndjson(&out_dir.join("metrics.jsonl"), &ec_metrics(&report))?;
            std::fs::write(out_dir.join("config.txt"), cfg.to_text()).map_err(|e| Error::io(&out_dir, e))?;
            let best = report.checkpoints.iter().map(|c| c.1).fold(0.0, f64::max);
            let last = report.checkpoints.last().copied().unwrap_or((0, 0.0));
            print_json(serde_json::json!({
                "checkpoints": report.checkpoints.len(),
                "final_step": last.0,
                "final_accuracy": last.1,
                "best_accuracy": best,
            }));
        }
        Cmd::NmtFinetune {
            data,
            src_agent,
            tgt_agent,
            no_transfer,
            reg,
            no_adapter,
            out,
            metrics,
            hyp_out,
            common,
        } => {
            let mut extra = Vec::new();
            if no_transfer {
                extra.push("transfer=false".to_string());
            }
            if let Some(r) = reg {
                extra.push(format!("reg={r}"));
            }
            if no_adapter {
                extra.push("adapter=false".to_string());
            }
            let cfg = config(&common, &extra)?;
            let task = data.load(false)?;
            let agents = match (&src_agent, &tgt_agent) {
                (Some(s), Some(t)) if cfg.transfer => Some((load_agent(s, &cfg)?.0, load_agent(t, &cfg)?.0)),
                _ if cfg.transfer => {
                    return Err(Error::Config(
                        "transfer needs --src-agent and --tgt-agent (or --no-transfer)".into(),
                    ))
                }
                _ => None,
            };
            let mut saved = None;
            let mut on_best = |rec: &ecmt::nmt::MetricRecord, params: &ecmt::nn::ParamStore, rng: &ecmt::rng::RunRng| {
                saved = Some((rec.clone(), params.clone(), state_string(rng)));
                Ok(())
            };
            let outcome = run_finetune(
                &cfg,
                &task,
                agents.as_ref().map(|(s, t)| (s, t)),
                cfg.ft_seed,
                &mut on_best,
            )?;
            if let Some((rec, params, rng)) = saved {
                save_checkpoint(&out, &params, &nmt_meta(&outcome.model, &rec, &cfg, rng))?;
            }
            if let Some(m) = metrics {
                write_ndjson(&m, &outcome.report.metrics)?;
            }
            if let Some(h) = hyp_out {
                write_lines(&h, &outcome.hypotheses)?;
            }
            print_json(serde_json::json!({
                "best_epoch": outcome.report.best_epoch,
                "best_valid_bleu": outcome.report.best_valid_bleu,
                "steps": outcome.report.steps,
                "test_bleu": (!task.test_src.is_empty()).then_some(outcome.test.bleu),
            }));
        }
        Cmd::Translate {
            model,
            src_tok,
            tgt_tok,
            input,
            output,
            beam,
            common,
        } => {
            let cfg = config(&common, &[])?;
            let (m, _) = load_model(&model)?;
            let (st, tt) = (load_tokenizer(&src_tok)?, load_tokenizer(&tgt_tok)?);
            let c = &m.arch.config;
            if st.vocab_size() != c.src_vocab || tt.vocab_size() != c.tgt_vocab {
                return Err(Error::VocabMismatch(format!(
                    "tokenizers have {}/{} tokens, model expects {}/{}",
                    st.vocab_size(),
                    tt.vocab_size(),
                    c.src_vocab,
                    c.tgt_vocab
                )));
            }
            let sources: Vec<Vec<usize>> = read_lines(&input)?.iter().map(|l| st.encode(l)).collect();
            let hyps = translate(&m, &tt.vocab, &sources, beam.unwrap_or(cfg.beam), cfg.max_len)?;
            write_lines(&output, &hyps)?;
        }
        Cmd::ScoreBleu {
            hyp,
            reference,
            common,
        } => {
            config(&common, &[])?;
            let h = read_lines(&hyp)?;
            let r = read_lines(&reference)?;
            println!("{}", bleu4(&h, &r)?.to_json());
        }
        Cmd::SweepAccuracy {
            data,
            src_run,
            tgt_run,
            src_targets,
            tgt_targets,
            work,
            out,
            common,
        } => {
            let cfg = config(&common, &[])?;
            let task = data.load(true)?;
            let grid = sweep_accuracy(&cfg, &task, &src_run, &tgt_run, &src_targets, &tgt_targets, &work)?;
            std::fs::write(&out, grid.to_csv()).map_err(|e| Error::io(&out, e))?;
            let long = out.with_extension("cells.csv");
            std::fs::write(&long, grid.to_long_csv()).map_err(|e| Error::io(&long, e))?;
            let absent = grid.cells.iter().filter(|c| c.test_bleu.is_none()).count();
            print_json(serde_json::json!({"cells": grid.cells.len(), "absent": absent}));
        }
        Cmd::SweepMaxlen {
            data,
            train_features,
            valid_features,
            l_values,
            accuracy_target,
            work,
            out,
            common,
        } => {
            let cfg = config(&common, &[])?;
            let task = data.load(true)?;
            let train = FeatureSet::load(&train_features, Split::Train)?;
            let valid = FeatureSet::load(&valid_features, Split::Valid)?;
            let rows = sweep_maxlen(&cfg, &task, (&train, &valid), &l_values, accuracy_target, &work)?;
            std::fs::write(&out, maxlen_csv(&rows)).map_err(|e| Error::io(&out, e))?;
            let flagged = rows.iter().filter(|r| r.flagged).count();
            print_json(serde_json::json!({"rows": rows.len(), "flagged": flagged}));
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::json!({"error": kind, "message": message, "exit": code})
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("usage", first, 1);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), if e.is_validation() { 1 } else { 2 }),
    }
}
